#include "snprex/head.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "snprex/errors.hpp"
#include "snprex/rng.hpp"

namespace snprex {

using kernels::matvec_acc;
using kernels::matvec_t_acc;
using kernels::outer_acc;

HeadConfig HeadConfig::tiny() {
  HeadConfig cfg;
  cfg.kernel_width = 3;
  cfg.filters = 2;
  cfg.hidden = 2;
  cfg.dense = 3;
  return cfg;
}

void HeadConfig::validate() const {
  if (kernel_width % 2 == 0) throw ConfigMismatch("head kernel_width must be odd");
  if (filters == 0 || hidden == 0 || dense == 0) throw ConfigMismatch("head sizes must be positive");
  if (pool_window == 0 || pool_stride == 0) throw ConfigMismatch("pool window and stride must be at least 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigMismatch("dropout_p must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// GRU

GruParams GruParams::zeros(std::size_t hidden, std::size_t input, bool use_bias) {
  GruParams p;
  p.W_z = p.W_r = p.W_c = Tensor({hidden, hidden});
  p.U_z = p.U_r = p.U_c = Tensor({hidden, input});
  p.use_bias = use_bias;
  if (use_bias) p.b_z = p.b_r = p.b_c = Tensor({hidden});
  return p;
}

void GruParams::check() const {
  const std::size_t H = hidden(), D = input();
  for (const Tensor* w : {&W_z, &W_r, &W_c}) {
    if (w->shape() != std::vector<std::size_t>{H, H}) throw DimensionMismatch("GRU W matrices must be HxH");
  }
  for (const Tensor* u : {&U_z, &U_r, &U_c}) {
    if (u->shape() != std::vector<std::size_t>{H, D}) throw DimensionMismatch("GRU U matrices must be Hxd_in");
  }
  if (use_bias) {
    for (const Tensor* b : {&b_z, &b_r, &b_c}) {
      if (b->shape() != std::vector<std::size_t>{H}) throw DimensionMismatch("GRU biases must have H entries");
    }
  }
}

namespace {

double sigmoid(double a) {
  if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

}  // namespace

GruStep gru_cell(std::span<const double> h_prev, std::span<const double> x_t, const GruParams& p) {
  const std::size_t H = p.hidden();
  if (h_prev.size() != H || x_t.size() != p.input()) {
    throw DimensionMismatch("gru_cell: h_prev has " + std::to_string(h_prev.size()) + " entries, x_t has " +
                            std::to_string(x_t.size()) + "; expected " + std::to_string(H) + " and " +
                            std::to_string(p.input()));
  }
  GruStep s;
  s.x_t.assign(x_t.begin(), x_t.end());
  s.h_prev.assign(h_prev.begin(), h_prev.end());
  std::vector<double> az(H, 0.0), ar(H, 0.0), ac(H, 0.0);
  if (p.use_bias) {
    for (std::size_t i = 0; i < H; ++i) az[i] = p.b_z[i], ar[i] = p.b_r[i], ac[i] = p.b_c[i];
  }
  matvec_acc(p.W_z, h_prev, az);
  matvec_acc(p.U_z, x_t, az);
  matvec_acc(p.W_r, h_prev, ar);
  matvec_acc(p.U_r, x_t, ar);
  s.z.resize(H);
  s.r.resize(H);
  std::vector<double> hr(H);
  for (std::size_t i = 0; i < H; ++i) {
    s.z[i] = sigmoid(az[i]);
    s.r[i] = sigmoid(ar[i]);
    hr[i] = h_prev[i] * s.r[i];
  }
  matvec_acc(p.W_c, hr, ac);
  matvec_acc(p.U_c, x_t, ac);
  s.c.resize(H);
  s.h_t.resize(H);
  for (std::size_t i = 0; i < H; ++i) {
    s.c[i] = std::tanh(ac[i]);
    s.h_t[i] = s.z[i] * s.c[i] + (1.0 - s.z[i]) * h_prev[i];
  }
  return s;
}

std::vector<double> bigru_forward(const Tensor& seq, std::size_t pooled_length, const GruParams& fwd,
                                  const GruParams& bwd, BiGruTrace* trace) {
  if (pooled_length == 0) throw ZeroLength("bigru_forward: pooled length is 0");
  if (seq.rank() != 2 || pooled_length > seq.dim(0)) throw DimensionMismatch("bigru_forward: pooled_length > rows");
  fwd.check();
  bwd.check();
  if (fwd.input() != seq.dim(1) || bwd.input() != seq.dim(1)) {
    throw DimensionMismatch("bigru_forward: sequence width " + std::to_string(seq.dim(1)) + " vs GRU input " +
                            std::to_string(fwd.input()));
  }
  std::vector<double> hf(fwd.hidden(), 0.0), hb(bwd.hidden(), 0.0);
  if (trace) {
    trace->forward.clear();
    trace->backward.clear();
  }
  for (std::size_t t = 0; t < pooled_length; ++t) {
    GruStep s = gru_cell(hf, seq.row(t), fwd);
    hf = s.h_t;
    if (trace) trace->forward.push_back(std::move(s));
  }
  for (std::size_t t = pooled_length; t-- > 0;) {
    GruStep s = gru_cell(hb, seq.row(t), bwd);
    hb = s.h_t;
    if (trace) trace->backward.push_back(std::move(s));
  }
  hf.insert(hf.end(), hb.begin(), hb.end());
  return hf;
}

namespace {

// Backpropagates one cell step. dh_t is consumed; returns dh_prev and adds dx.
std::vector<double> gru_step_backward(const GruStep& s, const GruParams& p, std::span<const double> dh_t,
                                      GruParams& g, std::span<double> dx) {
  const std::size_t H = p.hidden();
  std::vector<double> dh_prev(H), da_z(H), da_r(H), da_c(H), hr(H), d_hr(H, 0.0);
  for (std::size_t i = 0; i < H; ++i) {
    dh_prev[i] = dh_t[i] * (1.0 - s.z[i]);
    const double dz = dh_t[i] * (s.c[i] - s.h_prev[i]);
    const double dc = dh_t[i] * s.z[i];
    da_z[i] = dz * s.z[i] * (1.0 - s.z[i]);
    da_c[i] = dc * (1.0 - s.c[i] * s.c[i]);
    hr[i] = s.h_prev[i] * s.r[i];
  }
  outer_acc(g.W_c, da_c, hr);
  outer_acc(g.U_c, da_c, s.x_t);
  matvec_t_acc(p.W_c, da_c, d_hr);
  matvec_t_acc(p.U_c, da_c, dx);
  for (std::size_t i = 0; i < H; ++i) {
    dh_prev[i] += d_hr[i] * s.r[i];
    const double dr = d_hr[i] * s.h_prev[i];
    da_r[i] = dr * s.r[i] * (1.0 - s.r[i]);
  }
  outer_acc(g.W_z, da_z, s.h_prev);
  outer_acc(g.U_z, da_z, s.x_t);
  matvec_t_acc(p.W_z, da_z, dh_prev);
  matvec_t_acc(p.U_z, da_z, dx);
  outer_acc(g.W_r, da_r, s.h_prev);
  outer_acc(g.U_r, da_r, s.x_t);
  matvec_t_acc(p.W_r, da_r, dh_prev);
  matvec_t_acc(p.U_r, da_r, dx);
  if (p.use_bias) {
    for (std::size_t i = 0; i < H; ++i) g.b_z[i] += da_z[i], g.b_r[i] += da_r[i], g.b_c[i] += da_c[i];
  }
  return dh_prev;
}

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

void glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters

HeadParameters HeadParameters::zeros(const HeadConfig& cfg, std::size_t input_dim) {
  cfg.validate();
  if (input_dim == 0) throw DimensionMismatch("head input width must be positive");
  HeadParameters p;
  p.conv_kernel = Tensor({cfg.kernel_width, input_dim, cfg.filters});
  p.conv_bias = Tensor({cfg.filters});
  p.gru_fwd = GruParams::zeros(cfg.hidden, cfg.filters, cfg.use_bias);
  p.gru_bwd = GruParams::zeros(cfg.hidden, cfg.filters, cfg.use_bias);
  p.fc1_weight = Tensor({cfg.dense, 2 * cfg.hidden});
  p.fc1_bias = Tensor({cfg.dense});
  p.fc2_weight = Tensor({2, cfg.dense});
  p.fc2_bias = Tensor({2});
  p.touch();
  return p;
}

HeadParameters HeadParameters::initialize(const HeadConfig& cfg, std::size_t input_dim, std::uint64_t seed) {
  HeadParameters p = zeros(cfg, input_dim);
  Rng rng(mix_seed(seed, 0x4EAD));
  const std::size_t k = cfg.kernel_width, F = cfg.filters, H = cfg.hidden;
  glorot(p.conv_kernel, k * input_dim, k * F, rng);
  for (GruParams* g : {&p.gru_fwd, &p.gru_bwd}) {
    for (Tensor* w : {&g->W_z, &g->W_r, &g->W_c}) glorot(*w, H, H, rng);
    for (Tensor* u : {&g->U_z, &g->U_r, &g->U_c}) glorot(*u, F, H, rng);
  }
  glorot(p.fc1_weight, 2 * H, cfg.dense, rng);
  glorot(p.fc2_weight, cfg.dense, 2, rng);
  p.touch();
  return p;
}

void HeadParameters::touch() { version = next_version(); }

void HeadParameters::check(const HeadConfig& cfg, std::size_t d) const {
  const HeadParameters expected = zeros(cfg, d);
  const auto want = expected.named();
  const auto have = named();
  if (want.size() != have.size()) throw DimensionMismatch("head parameters do not match the head config");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (!want[i].second->same_shape(*have[i].second)) {
      throw DimensionMismatch("head parameter " + want[i].first + " has shape " +
                              shape_string(have[i].second->shape()) + ", expected " +
                              shape_string(want[i].second->shape()));
    }
  }
}

std::vector<std::pair<std::string, Tensor*>> HeadParameters::named() {
  std::vector<std::pair<std::string, Tensor*>> out{{"conv.kernel", &conv_kernel}, {"conv.bias", &conv_bias}};
  for (auto [prefix, g] : {std::pair{"gru_fwd.", &gru_fwd}, std::pair{"gru_bwd.", &gru_bwd}}) {
    const std::string p = prefix;
    out.emplace_back(p + "W_z", &g->W_z);
    out.emplace_back(p + "W_r", &g->W_r);
    out.emplace_back(p + "W_c", &g->W_c);
    out.emplace_back(p + "U_z", &g->U_z);
    out.emplace_back(p + "U_r", &g->U_r);
    out.emplace_back(p + "U_c", &g->U_c);
    if (g->use_bias) {
      out.emplace_back(p + "b_z", &g->b_z);
      out.emplace_back(p + "b_r", &g->b_r);
      out.emplace_back(p + "b_c", &g->b_c);
    }
  }
  out.emplace_back("fc1.weight", &fc1_weight);
  out.emplace_back("fc1.bias", &fc1_bias);
  out.emplace_back("fc2.weight", &fc2_weight);
  out.emplace_back("fc2.bias", &fc2_bias);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> HeadParameters::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<HeadParameters*>(this)->named()) out.emplace_back(name, t);
  return out;
}

std::size_t HeadParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

bool HeadParameters::same_values(const HeadParameters& o) const {
  const auto a = named(), b = o.named();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first != b[i].first || !(*a[i].second == *b[i].second)) return false;
  }
  return true;
}

void accumulate(HeadParameters& dst, const HeadParameters& src, double scale) {
  auto d = dst.named();
  const auto s = src.named();
  if (d.size() != s.size()) throw ShapeMismatch("accumulate: parameter sets differ");
  for (std::size_t i = 0; i < d.size(); ++i) {
    Tensor& a = *d[i].second;
    const Tensor& b = *s[i].second;
    if (!a.same_shape(b)) throw ShapeMismatch("accumulate: shape mismatch at " + d[i].first);
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += scale * b[j];
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

std::array<double, 2> softmax(std::array<double, 2> logits) {
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

double cross_entropy(const std::array<double, 2>& probs, int label) {
  return -std::log(std::max(probs.at(static_cast<std::size_t>(label)), 1e-12));
}

HeadOutput head_forward(const EmbeddingMatrix& E, const HeadParameters& params, const HeadConfig& cfg, Mode mode,
                        std::uint64_t seed, kernels::Backend backend) {
  cfg.validate();
  if (E.values.rank() != 2) throw DimensionMismatch("head_forward: embedding must be a matrix");
  params.check(cfg, E.width());
  if (!E.values.all_finite()) throw DimensionMismatch("head_forward: embedding contains non-finite values");
  const std::size_t L = E.length();
  const std::size_t n = std::min(E.true_length, L);
  if (n == 0) throw ZeroLength("head_forward: instance has no tokens");

  HeadOutput out;
  HeadCache& c = out.cache;
  c.mode = mode;
  c.params_version = params.version;
  c.config = cfg;
  c.input = E;
  c.input.true_length = n;
  c.conv_out = kernels::conv1d_forward(E.values, n, params.conv_kernel, params.conv_bias, backend);
  c.pooled = kernels::maxpool(c.conv_out, cfg.pool_window, cfg.pool_stride, n, &c.pool_argmax);
  c.gru_out = bigru_forward(c.pooled, c.pooled.dim(0), params.gru_fwd, params.gru_bwd, &c.gru);

  const std::size_t D1 = cfg.dense;
  c.fc1_out.assign(params.fc1_bias.values().begin(), params.fc1_bias.values().end());
  matvec_acc(params.fc1_weight, c.gru_out, c.fc1_out);
  for (auto& v : c.fc1_out) v = std::max(0.0, v);

  c.keep_scale.assign(D1, 1.0);
  if (mode == Mode::Train && cfg.dropout_p > 0.0) {
    Rng rng(mix_seed(seed, 0xD80F));
    const double keep = 1.0 / (1.0 - cfg.dropout_p);
    for (auto& m : c.keep_scale) m = rng.uniform() < cfg.dropout_p ? 0.0 : keep;
  }
  c.dense_out.resize(D1);
  for (std::size_t i = 0; i < D1; ++i) c.dense_out[i] = c.fc1_out[i] * c.keep_scale[i];

  std::vector<double> logits(params.fc2_bias.values().begin(), params.fc2_bias.values().end());
  matvec_acc(params.fc2_weight, c.dense_out, logits);
  c.logits = {logits[0], logits[1]};
  c.probs = softmax(c.logits);
  out.probs = c.probs;
  return out;
}

namespace {

HeadGradients backward_from_logits(const HeadCache& c, const HeadParameters& params, std::array<double, 2> d_logits,
                                   kernels::Backend backend) {
  if (c.params_version != params.version) {
    throw StaleCache("head_backward: parameters changed since the forward pass (version " +
                     std::to_string(c.params_version) + " vs " + std::to_string(params.version) + ")");
  }
  const HeadConfig& cfg = c.config;
  HeadGradients g{HeadParameters::zeros(cfg, c.input.width()), Tensor(c.input.values.shape())};
  HeadParameters& gp = g.params;

  // fc2
  const std::vector<double> dl{d_logits[0], d_logits[1]};
  gp.fc2_bias[0] += dl[0];
  gp.fc2_bias[1] += dl[1];
  outer_acc(gp.fc2_weight, dl, c.dense_out);
  std::vector<double> d_dense(cfg.dense, 0.0);
  matvec_t_acc(params.fc2_weight, dl, d_dense);

  // dropout + ReLU + fc1
  std::vector<double> d_fc1(cfg.dense);
  for (std::size_t i = 0; i < cfg.dense; ++i) {
    d_fc1[i] = c.fc1_out[i] > 0.0 ? d_dense[i] * c.keep_scale[i] : 0.0;
    gp.fc1_bias[i] += d_fc1[i];
  }
  outer_acc(gp.fc1_weight, d_fc1, c.gru_out);
  std::vector<double> d_gru(2 * cfg.hidden, 0.0);
  matvec_t_acc(params.fc1_weight, d_fc1, d_gru);

  // BiGRU
  const std::size_t H = cfg.hidden, P = c.pooled.dim(0);
  Tensor d_pooled(c.pooled.shape());
  std::vector<double> dh(d_gru.begin(), d_gru.begin() + static_cast<long>(H));
  for (std::size_t t = P; t-- > 0;) {
    dh = gru_step_backward(c.gru.forward[t], params.gru_fwd, dh, gp.gru_fwd, d_pooled.row(t));
  }
  dh.assign(d_gru.begin() + static_cast<long>(H), d_gru.end());
  for (std::size_t i = P; i-- > 0;) {
    // backward[i] consumed row P-1-i
    dh = gru_step_backward(c.gru.backward[i], params.gru_bwd, dh, gp.gru_bwd, d_pooled.row(P - 1 - i));
  }

  // pool + conv
  const Tensor d_conv = kernels::maxpool_backward(d_pooled, c.pool_argmax, c.conv_out.dim(0));
  kernels::conv1d_backward(c.input.values, c.input.true_length, params.conv_kernel, c.conv_out, d_conv,
                           gp.conv_kernel, gp.conv_bias, g.embedding, backend);
  return g;
}

}  // namespace

HeadGradients head_backward(const HeadCache& cache, const HeadParameters& params, std::array<double, 2> grad_probs,
                            kernels::Backend backend) {
  // Softmax Jacobian: dl_i = p_i (g_i - sum_j p_j g_j)
  const auto& p = cache.probs;
  const double dot = p[0] * grad_probs[0] + p[1] * grad_probs[1];
  return backward_from_logits(cache, params, {p[0] * (grad_probs[0] - dot), p[1] * (grad_probs[1] - dot)}, backend);
}

HeadGradients head_backward(const HeadCache& cache, const HeadParameters& params, int label,
                            kernels::Backend backend) {
  if (label != 0 && label != 1) throw ConfigMismatch("class label must be 0 or 1");
  std::array<double, 2> d{cache.probs[0], cache.probs[1]};
  d[static_cast<std::size_t>(label)] -= 1.0;
  return backward_from_logits(cache, params, d, backend);
}

// ---------------------------------------------------------------------------
// Finite differences

GradientCheckResult gradient_check(const HeadParameters& params, const EmbeddingMatrix& E, int label,
                                   const HeadConfig& cfg, double eps, std::uint64_t seed,
                                   std::size_t max_coordinates) {
  const HeadOutput fwd = head_forward(E, params, cfg, Mode::Eval, seed);
  const HeadGradients analytic = head_backward(fwd.cache, params, label);

  struct Coord {
    std::string name;
    std::size_t tensor;  // index into named(), or npos for the embedding
    std::size_t index;
  };
  std::vector<Coord> coords;
  const auto names = params.named();
  for (std::size_t t = 0; t < names.size(); ++t) {
    for (std::size_t i = 0; i < names[t].second->size(); ++i) coords.push_back({names[t].first, t, i});
  }
  for (std::size_t i = 0; i < E.values.size(); ++i) coords.push_back({"embedding", std::string::npos, i});
  if (max_coordinates != 0 && coords.size() > max_coordinates) {
    Rng rng(mix_seed(seed, 0x6C4E));
    rng.shuffle(std::span<Coord>(coords));
    coords.resize(max_coordinates);
  }

  const auto analytic_names = analytic.params.named();
  GradientCheckResult result;
  result.coordinates = coords.size();
  HeadParameters p = params;
  EmbeddingMatrix e = E;
  auto loss = [&] { return cross_entropy(head_forward(e, p, cfg, Mode::Eval, seed).probs, label); };
  for (const auto& co : coords) {
    double* slot = co.tensor == std::string::npos ? &e.values[co.index] : &(*p.named()[co.tensor].second)[co.index];
    const double a = co.tensor == std::string::npos ? analytic.embedding[co.index]
                                                    : (*analytic_names[co.tensor].second)[co.index];
    const double saved = *slot;
    *slot = saved + eps;
    const double up = loss();
    *slot = saved - eps;
    const double down = loss();
    *slot = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
    const double rel = std::abs(a - numeric) == 0.0 ? 0.0 : std::abs(a - numeric) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_coordinate = co.name + "[" + std::to_string(co.index) + "]";
    }
  }
  return result;
}

TinyProblem tiny_problem(std::uint64_t seed) {
  TinyProblem tp;
  tp.config = HeadConfig::tiny();
  constexpr std::size_t L = 6, d = 4;
  Rng rng(mix_seed(seed, 0x7141));
  tp.params = HeadParameters::zeros(tp.config, d);
  for (auto& [name, t] : tp.params.named()) {
    for (auto& v : t->values()) v = rng.uniform(-1.0, 1.0);
  }
  tp.params.touch();
  tp.input.values = Tensor({L, d});
  tp.input.true_length = L - rng.below(3);
  for (std::size_t i = 0; i < tp.input.true_length * d; ++i) tp.input.values[i] = rng.uniform(-1.0, 1.0);
  tp.label = static_cast<int>(rng.below(2));
  return tp;
}

}  // namespace snprex
