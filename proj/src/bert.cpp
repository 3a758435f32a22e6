#include "snprex/bert.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "snprex/errors.hpp"
#include "snprex/rng.hpp"

namespace snprex {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// safetensors

namespace {

double half_to_double(std::uint16_t h) {
  const int sign = (h >> 15) & 1, exp = (h >> 10) & 0x1F, frac = h & 0x3FF;
  double v;
  if (exp == 0) {
    v = std::ldexp(frac, -24);
  } else if (exp == 31) {
    v = frac ? std::nan("") : INFINITY;
  } else {
    v = std::ldexp(frac + 1024, exp - 25);
  }
  return sign ? -v : v;
}

template <typename T>
T load_le(const unsigned char* p) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  T v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

}  // namespace

std::map<std::string, Tensor> read_safetensors(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelUnavailable("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8) throw MalformedRecord(path.string() + ": truncated safetensors header");
  const auto header_len = load_le<std::uint64_t>(bytes.data());
  if (header_len > bytes.size() - 8) throw MalformedRecord(path.string() + ": header length exceeds file");
  json header;
  try {
    header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<long>(header_len));
  } catch (const json::exception& e) {
    throw MalformedRecord(path.string() + ": bad safetensors header: " + e.what());
  }
  const unsigned char* data = bytes.data() + 8 + header_len;
  const std::size_t data_size = bytes.size() - 8 - header_len;

  std::map<std::string, Tensor> out;
  for (const auto& [name, info] : header.items()) {
    if (name == "__metadata__") continue;
    const std::string dtype = info.at("dtype");
    std::vector<std::size_t> shape = info.at("shape").get<std::vector<std::size_t>>();
    const auto off = info.at("data_offsets").get<std::vector<std::size_t>>();
    if (off.size() != 2 || off[0] > off[1] || off[1] > data_size) {
      throw MalformedRecord(path.string() + ": bad offsets for " + name);
    }
    if (shape.empty()) shape = {1};
    Tensor t(shape);
    const unsigned char* p = data + off[0];
    const std::size_t width = dtype == "F64" ? 8 : dtype == "F32" ? 4 : (dtype == "F16" || dtype == "BF16") ? 2 : 0;
    if (width == 0) throw MalformedRecord(path.string() + ": unsupported dtype " + dtype + " for " + name);
    if (off[1] - off[0] != t.size() * width) throw MalformedRecord(path.string() + ": size mismatch for " + name);
    for (std::size_t i = 0; i < t.size(); ++i, p += width) {
      if (dtype == "F64") {
        t[i] = load_le<double>(p);
      } else if (dtype == "F32") {
        t[i] = load_le<float>(p);
      } else if (dtype == "F16") {
        t[i] = half_to_double(load_le<std::uint16_t>(p));
      } else {
        t[i] = std::bit_cast<float>(static_cast<std::uint32_t>(load_le<std::uint16_t>(p)) << 16);
      }
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

void write_safetensors(const fs::path& path, const std::map<std::string, Tensor>& tensors) {
  json header = json::object();
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    header[name] = {{"dtype", "F64"}, {"shape", t.shape()}, {"data_offsets", {offset, offset + 8 * t.size()}}};
    offset += 8 * t.size();
  }
  std::string h = header.dump();
  while ((h.size() + 8) % 8) h.push_back(' ');
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingPath("cannot write " + path.string());
  const std::uint64_t n = h.size();
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : tensors) out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(8 * t.size()));
}

// ---------------------------------------------------------------------------
// Config and weights

BertConfig BertConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelUnavailable("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw MalformedRecord(path.string() + ": " + e.what());
  }
  BertConfig c;
  try {
    c.vocab_size = j.at("vocab_size");
    c.hidden = j.at("hidden_size");
    c.layers = j.at("num_hidden_layers");
    c.heads = j.at("num_attention_heads");
    c.intermediate = j.at("intermediate_size");
    c.max_positions = j.at("max_position_embeddings");
    c.type_vocab = j.value("type_vocab_size", std::size_t{2});
    c.layer_norm_eps = j.value("layer_norm_eps", 1e-12);
    c.initializer_range = j.value("initializer_range", 0.02);
    const std::string act = j.value("hidden_act", std::string("gelu"));
    if (act != "gelu") throw MalformedRecord(path.string() + ": unsupported hidden_act " + act);
  } catch (const json::exception& e) {
    throw MalformedRecord(path.string() + ": " + e.what());
  }
  if (c.heads == 0 || c.hidden % c.heads != 0) throw MalformedRecord(path.string() + ": hidden not divisible by heads");
  return c;
}

std::vector<std::pair<std::string, Tensor*>> BertWeights::named() {
  std::vector<std::pair<std::string, Tensor*>> out{
      {"embeddings.word_embeddings.weight", &word},
      {"embeddings.position_embeddings.weight", &position},
      {"embeddings.token_type_embeddings.weight", &token_type},
      {"embeddings.LayerNorm.weight", &emb_ln_g},
      {"embeddings.LayerNorm.bias", &emb_ln_b},
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::string p = "encoder.layer." + std::to_string(i) + ".";
    out.emplace_back(p + "attention.self.query.weight", &l.query_w);
    out.emplace_back(p + "attention.self.query.bias", &l.query_b);
    out.emplace_back(p + "attention.self.key.weight", &l.key_w);
    out.emplace_back(p + "attention.self.key.bias", &l.key_b);
    out.emplace_back(p + "attention.self.value.weight", &l.value_w);
    out.emplace_back(p + "attention.self.value.bias", &l.value_b);
    out.emplace_back(p + "attention.output.dense.weight", &l.attn_out_w);
    out.emplace_back(p + "attention.output.dense.bias", &l.attn_out_b);
    out.emplace_back(p + "attention.output.LayerNorm.weight", &l.attn_ln_g);
    out.emplace_back(p + "attention.output.LayerNorm.bias", &l.attn_ln_b);
    out.emplace_back(p + "intermediate.dense.weight", &l.inter_w);
    out.emplace_back(p + "intermediate.dense.bias", &l.inter_b);
    out.emplace_back(p + "output.dense.weight", &l.out_w);
    out.emplace_back(p + "output.dense.bias", &l.out_b);
    out.emplace_back(p + "output.LayerNorm.weight", &l.out_ln_g);
    out.emplace_back(p + "output.LayerNorm.bias", &l.out_ln_b);
  }
  return out;
}

namespace {

std::vector<std::size_t> expected_shape(const std::string& name, const BertConfig& c) {
  const std::size_t D = c.hidden, I = c.intermediate;
  auto ends = [&](std::string_view s) { return name.ends_with(s); };
  if (name == "embeddings.word_embeddings.weight") return {c.vocab_size, D};
  if (name == "embeddings.position_embeddings.weight") return {c.max_positions, D};
  if (name == "embeddings.token_type_embeddings.weight") return {c.type_vocab, D};
  if (ends("intermediate.dense.weight")) return {I, D};
  if (ends("intermediate.dense.bias")) return {I};
  if (ends("output.dense.weight") && !ends("attention.output.dense.weight")) return {D, I};
  if (ends(".weight") && name.find("LayerNorm") == std::string::npos) return {D, D};
  return {D};
}

BertWeights load_weights(const fs::path& dir, const BertConfig& cfg) {
  const fs::path file = dir / "model.safetensors";
  if (!fs::exists(file)) {
    throw ModelUnavailable("no model.safetensors in " + dir.string() +
                           (fs::exists(dir / "pytorch_model.bin") ? " (convert pytorch_model.bin to safetensors)" : ""));
  }
  auto tensors = read_safetensors(file);
  BertWeights w;
  w.layers.resize(cfg.layers);
  for (auto& [name, slot] : w.named()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) it = tensors.find("bert." + name);
    if (it == tensors.end()) throw ModelUnavailable(file.string() + " lacks tensor " + name);
    if (it->second.shape() != expected_shape(name, cfg)) {
      throw DimensionMismatch(name + " has shape " + shape_string(it->second.shape()) + ", config implies " +
                              shape_string(expected_shape(name, cfg)));
    }
    *slot = std::move(it->second);
  }
  return w;
}

bool read_lowercase(const fs::path& dir) {
  std::ifstream in(dir / "tokenizer_config.json");
  if (!in) return true;
  try {
    return json::parse(in).value("do_lower_case", true);
  } catch (const json::exception&) {
    return true;
  }
}

}  // namespace

BertEncoder::BertEncoder(EncoderSpec spec)
    : Encoder(std::move(spec)), tokenizer_(std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]"}, true) {
  spec_.validate();
  const fs::path dir = spec_.model_id_or_path;
  if (!fs::is_directory(dir)) {
    throw ModelUnavailable("contextual model '" + spec_.model_id_or_path +
                           "' is not a local directory; download it and pass its path");
  }
  config_ = BertConfig::load(dir / "config.json");
  weights_ = load_weights(dir, config_);
  tokenizer_ = WordPieceTokenizer::load(dir / "vocab.txt", read_lowercase(dir));
  finish_setup();
}

BertEncoder::BertEncoder(EncoderSpec spec, BertConfig config, BertWeights weights, WordPieceTokenizer tokenizer)
    : Encoder(std::move(spec)), config_(config), weights_(std::move(weights)), tokenizer_(std::move(tokenizer)) {
  finish_setup();
}

void BertEncoder::finish_setup() {
  if (spec_.d == 0) spec_.d = config_.hidden;
  if (spec_.d != config_.hidden) {
    throw DimensionMismatch("encoder d=" + std::to_string(spec_.d) + " but the model's hidden size is " +
                            std::to_string(config_.hidden));
  }
  // Marker tokens appended to the vocabulary get fresh rows N(0, range^2).
  const std::size_t have = weights_.word.dim(0);
  if (tokenizer_.size() > have) {
    Tensor grown({tokenizer_.size(), config_.hidden});
    std::copy(weights_.word.values().begin(), weights_.word.values().end(), grown.values().begin());
    Rng rng(mix_seed(spec_.seed, 0xB3E7));
    for (std::size_t i = have * config_.hidden; i < grown.size(); ++i) grown[i] = config_.initializer_range * rng.normal();
    weights_.word = std::move(grown);
    config_.vocab_size = tokenizer_.size();
  }
}

std::vector<std::pair<std::string, Tensor*>> BertEncoder::parameters() {
  if (!spec_.trainable) return {};
  auto named = weights_.named();
  for (auto& [n, t] : named) n = "bert." + n;
  return named;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using ConstMap = Eigen::Map<const RMat>;
using MutMap = Eigen::Map<RMat>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMap mat(const Tensor& t) { return ConstMap(t.data(), static_cast<long>(t.dim(0)), static_cast<long>(t.dim(1))); }
MutMap mat(Tensor& t) { return MutMap(t.data(), static_cast<long>(t.dim(0)), static_cast<long>(t.dim(1))); }
ConstVecMap vec(const Tensor& t) { return ConstVecMap(t.data(), static_cast<long>(t.size())); }
Eigen::Map<Eigen::RowVectorXd> vec(Tensor& t) { return {t.data(), static_cast<long>(t.size())}; }

struct LayerNormOut {
  RMat y, xhat;
  Vec rstd;
};

LayerNormOut layer_norm(const RMat& x, const Tensor& g, const Tensor& b, double eps) {
  LayerNormOut o;
  const long D = x.cols();
  o.xhat.resize(x.rows(), D);
  o.rstd.resize(x.rows());
  for (long i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    o.rstd[i] = 1.0 / std::sqrt(var + eps);
    o.xhat.row(i) = (x.row(i).array() - mu) * o.rstd[i];
  }
  o.y = (o.xhat.array().rowwise() * vec(g).array()).rowwise() + vec(b).array();
  return o;
}

// Returns dx; accumulates dg, db.
RMat layer_norm_backward(const RMat& dy, const RMat& xhat, const Vec& rstd, const Tensor& g, Tensor& dg, Tensor& db) {
  vec(dg) += (dy.array() * xhat.array()).colwise().sum().matrix();
  vec(db) += dy.colwise().sum();
  const RMat dxhat = dy.array().rowwise() * vec(g).array();
  RMat dx(dy.rows(), dy.cols());
  const double D = static_cast<double>(dy.cols());
  for (long i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).sum() / D;
    const double m2 = dxhat.row(i).dot(xhat.row(i)) / D;
    dx.row(i) = rstd[i] * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
  }
  return dx;
}

RMat linear(const RMat& x, const Tensor& w, const Tensor& b) {
  RMat y = x * mat(w).transpose();
  y.rowwise() += vec(b);
  return y;
}

// y = x W^T + b: accumulates dW, db and returns dx.
RMat linear_backward(const RMat& dy, const RMat& x, const Tensor& w, Tensor& dw, Tensor& db) {
  mat(dw).noalias() += dy.transpose() * x;
  vec(db) += dy.colwise().sum();
  return dy * mat(w);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }
double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) + x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

struct LayerTape {
  RMat x_in, q, k, v, ctx, attn_xhat, x1, inter_pre, inter, out_xhat;
  Vec attn_rstd, out_rstd;
  std::vector<RMat> probs;  // per head, n x n
};

struct BertTape : EncoderTape {
  std::size_t n = 0;
  RMat emb_xhat;
  Vec emb_rstd;
  std::vector<LayerTape> layers;
};

}  // namespace

EmbeddingMatrix BertEncoder::run(const TokenizedInstance& inst, std::unique_ptr<EncoderTape>* tape_out) const {
  const std::size_t L = inst.max_len(), n = inst.true_length, D = config_.hidden;
  if (n > L) throw DimensionMismatch("instance " + inst.candidate_ref + " has true_length > max_len");
  if (n > config_.max_positions) {
    throw DimensionMismatch("instance length " + std::to_string(n) + " exceeds the model's " +
                            std::to_string(config_.max_positions) + " positions");
  }
  EmbeddingMatrix out{Tensor({L, D}), n};
  if (n == 0) return out;

  std::unique_ptr<BertTape> tape = tape_out ? std::make_unique<BertTape>() : nullptr;
  RMat x(static_cast<long>(n), static_cast<long>(D));
  for (std::size_t t = 0; t < n; ++t) {
    const auto id = static_cast<std::size_t>(inst.token_ids[t]);
    if (id >= weights_.word.dim(0)) throw DimensionMismatch("token id " + std::to_string(id) + " outside vocabulary");
    x.row(static_cast<long>(t)) = mat(weights_.word).row(static_cast<long>(id)) +
                                  mat(weights_.position).row(static_cast<long>(t)) + mat(weights_.token_type).row(0);
  }
  LayerNormOut ln = layer_norm(x, weights_.emb_ln_g, weights_.emb_ln_b, config_.layer_norm_eps);
  x = std::move(ln.y);
  if (tape) {
    tape->n = n;
    tape->emb_xhat = std::move(ln.xhat);
    tape->emb_rstd = std::move(ln.rstd);
  }

  const long H = static_cast<long>(config_.heads), Dh = static_cast<long>(D / config_.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(Dh));
  for (const auto& w : weights_.layers) {
    LayerTape lt;
    const RMat q = linear(x, w.query_w, w.query_b);
    const RMat k = linear(x, w.key_w, w.key_b);
    const RMat v = linear(x, w.value_w, w.value_b);
    RMat ctx(x.rows(), x.cols());
    for (long h = 0; h < H; ++h) {
      RMat s = (q.middleCols(h * Dh, Dh) * k.middleCols(h * Dh, Dh).transpose()) * scale;
      for (long i = 0; i < s.rows(); ++i) {
        const double m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp();
        s.row(i) /= s.row(i).sum();
      }
      ctx.middleCols(h * Dh, Dh) = s * v.middleCols(h * Dh, Dh);
      if (tape) lt.probs.push_back(std::move(s));
    }
    LayerNormOut a = layer_norm(linear(ctx, w.attn_out_w, w.attn_out_b) + x, w.attn_ln_g, w.attn_ln_b,
                                config_.layer_norm_eps);
    const RMat inter_pre = linear(a.y, w.inter_w, w.inter_b);
    const RMat inter = inter_pre.unaryExpr(&gelu);
    LayerNormOut o = layer_norm(linear(inter, w.out_w, w.out_b) + a.y, w.out_ln_g, w.out_ln_b, config_.layer_norm_eps);
    if (tape) {
      lt.x_in = std::move(x);
      lt.q = q;
      lt.k = k;
      lt.v = v;
      lt.ctx = std::move(ctx);
      lt.attn_xhat = std::move(a.xhat);
      lt.attn_rstd = std::move(a.rstd);
      lt.x1 = a.y;
      lt.inter_pre = inter_pre;
      lt.inter = inter;
      lt.out_xhat = std::move(o.xhat);
      lt.out_rstd = std::move(o.rstd);
      tape->layers.push_back(std::move(lt));
    }
    x = std::move(o.y);
  }
  MutMap(out.values.data(), static_cast<long>(L), static_cast<long>(D)).topRows(static_cast<long>(n)) = x;
  if (tape_out) *tape_out = std::move(tape);
  return out;
}

EmbeddingMatrix BertEncoder::embed(const TokenizedInstance& inst) const { return run(inst, nullptr); }

EmbeddingMatrix BertEncoder::embed(const TokenizedInstance& inst, std::unique_ptr<EncoderTape>& tape) const {
  if (!spec_.trainable) {
    tape.reset();
    return run(inst, nullptr);
  }
  return run(inst, &tape);
}

void BertEncoder::backward(const TokenizedInstance& inst, const EncoderTape* base, const Tensor& d_embedding,
                           std::vector<Tensor>& grads) const {
  if (!spec_.trainable) return;
  const auto* tape = dynamic_cast<const BertTape*>(base);
  if (!tape) throw StaleCache("contextual backward needs the tape from a training-mode embed");
  auto& self = const_cast<BertWeights&>(weights_);
  const auto named = self.named();
  if (grads.size() != named.size()) throw ShapeMismatch("contextual gradient list has the wrong length");
  const std::size_t n = tape->n, D = config_.hidden;
  if (n == 0) return;

  // Gradient tensors in named() order: 5 embedding tensors, then 16 per layer.
  auto g = [&](std::size_t i) -> Tensor& { return grads[i]; };
  RMat dx = ConstMap(d_embedding.data(), static_cast<long>(d_embedding.dim(0)), static_cast<long>(D)).topRows(static_cast<long>(n));

  const long H = static_cast<long>(config_.heads), Dh = static_cast<long>(D / config_.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(Dh));
  for (std::size_t li = weights_.layers.size(); li-- > 0;) {
    const auto& w = weights_.layers[li];
    const auto& lt = tape->layers[li];
    const std::size_t base_i = 5 + 16 * li;
    // output LayerNorm and FFN
    RMat dz2 = layer_norm_backward(dx, lt.out_xhat, lt.out_rstd, w.out_ln_g, g(base_i + 14), g(base_i + 15));
    RMat d_inter = linear_backward(dz2, lt.inter, w.out_w, g(base_i + 12), g(base_i + 13));
    d_inter.array() *= lt.inter_pre.unaryExpr(&gelu_grad).array();
    RMat dx1 = dz2 + linear_backward(d_inter, lt.x1, w.inter_w, g(base_i + 10), g(base_i + 11));
    // attention output LayerNorm
    RMat dz1 = layer_norm_backward(dx1, lt.attn_xhat, lt.attn_rstd, w.attn_ln_g, g(base_i + 8), g(base_i + 9));
    const RMat dctx = linear_backward(dz1, lt.ctx, w.attn_out_w, g(base_i + 6), g(base_i + 7));
    RMat dq(lt.q.rows(), lt.q.cols()), dk(lt.k.rows(), lt.k.cols()), dv(lt.v.rows(), lt.v.cols());
    for (long h = 0; h < H; ++h) {
      const RMat& p = lt.probs[static_cast<std::size_t>(h)];
      const auto dc = dctx.middleCols(h * Dh, Dh);
      const RMat dp = dc * lt.v.middleCols(h * Dh, Dh).transpose();
      dv.middleCols(h * Dh, Dh) = p.transpose() * dc;
      RMat ds = p.array() * (dp.array().colwise() - (dp.array() * p.array()).rowwise().sum());
      ds *= scale;
      dq.middleCols(h * Dh, Dh) = ds * lt.k.middleCols(h * Dh, Dh);
      dk.middleCols(h * Dh, Dh) = ds.transpose() * lt.q.middleCols(h * Dh, Dh);
    }
    dx = dz1;
    dx += linear_backward(dq, lt.x_in, w.query_w, g(base_i + 0), g(base_i + 1));
    dx += linear_backward(dk, lt.x_in, w.key_w, g(base_i + 2), g(base_i + 3));
    dx += linear_backward(dv, lt.x_in, w.value_w, g(base_i + 4), g(base_i + 5));
  }
  const RMat de = layer_norm_backward(dx, tape->emb_xhat, tape->emb_rstd, weights_.emb_ln_g, g(3), g(4));
  auto dword = mat(g(0));
  auto dpos = mat(g(1));
  auto dtype = mat(g(2));
  for (std::size_t t = 0; t < n; ++t) {
    dword.row(inst.token_ids[t]) += de.row(static_cast<long>(t));
    dpos.row(static_cast<long>(t)) += de.row(static_cast<long>(t));
    dtype.row(0) += de.row(static_cast<long>(t));
  }
}

}  // namespace snprex
