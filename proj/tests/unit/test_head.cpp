#include <doctest.h>

#include <cmath>

#include "oracle/head_oracle.hpp"
#include "snprex/errors.hpp"
#include "snprex/head.hpp"
#include "snprex/rng.hpp"

using namespace snprex;

namespace {

GruParams random_gru(std::size_t H, std::size_t D, Rng& rng, double scale) {
  GruParams p = GruParams::zeros(H, D);
  for (Tensor* t : {&p.W_z, &p.W_r, &p.W_c, &p.U_z, &p.U_r, &p.U_c}) {
    for (auto& v : t->values()) v = rng.uniform(-scale, scale);
  }
  return p;
}

GruParams scalar_gru(double w) {
  GruParams p = GruParams::zeros(1, 1);
  for (Tensor* t : {&p.W_z, &p.W_r, &p.W_c, &p.U_z, &p.U_r, &p.U_c}) (*t)[0] = w;
  return p;
}

}  // namespace

TEST_CASE("gru_cell zero parameters halve h_prev") {
  const GruParams p = GruParams::zeros(1, 1);
  const GruStep s = gru_cell(std::vector<double>{0.4}, std::vector<double>{0.9}, p);
  CHECK(s.z[0] == 0.5);
  CHECK(s.r[0] == 0.5);
  CHECK(s.c[0] == 0.0);
  CHECK(s.h_t[0] == 0.2);
}

TEST_CASE("gru_cell scalar case with unit weights") {
  // 30-digit evaluation: sigma(1) = 0.731058578630004879, tanh(1) = 0.761594155955764888,
  // h = z * c = 0.556769941145939744
  const GruStep s = gru_cell(std::vector<double>{0.0}, std::vector<double>{1.0}, scalar_gru(1.0));
  CHECK(s.z[0] == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(s.r[0] == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(s.c[0] == doctest::Approx(0.7615941559557649).epsilon(1e-14));
  CHECK(std::abs(s.h_t[0] - 0.556769941145939744) < 1e-15);
}

TEST_CASE("gru_cell reset gate multiplies h_prev before W_c") {
  // With W_c = 1 and U_c = 0 the candidate is tanh(h * r); a convention that
  // applied r after the product would give the same value only for r = 1.
  GruParams p = GruParams::zeros(2, 1);
  p.W_c(0, 1) = 1.0;
  p.W_r(1, 1) = 5.0;  // r_1 depends on h_1 only
  const std::vector<double> h{0.0, 0.6};
  const GruStep s = gru_cell(h, std::vector<double>{0.0}, p);
  const double r1 = 1.0 / (1.0 + std::exp(-3.0));
  CHECK(s.r[1] == doctest::Approx(r1));
  CHECK(s.c[0] == doctest::Approx(std::tanh(0.6 * r1)));
}

TEST_CASE("gru_cell rejects wrong sizes") {
  CHECK_THROWS_AS(gru_cell(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0}, scalar_gru(1.0)),
                  DimensionMismatch);
}

TEST_CASE("gate ranges and state bounds over random evaluations") {
  // Pre-activations stay below 12 in magnitude here; past about 19 tanh
  // rounds to exactly +-1 in double precision.
  Rng rng(6);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t H = 1 + rng.below(4), D = 1 + rng.below(4);
    const GruParams p = random_gru(H, D, rng, 1.5);
    std::vector<double> h(H), x(D);
    for (auto& v : h) v = rng.uniform(-1.0, 1.0);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    const GruStep s = gru_cell(h, x, p);
    for (std::size_t j = 0; j < H; ++j) {
      CHECK((s.z[j] > 0.0 && s.z[j] < 1.0));
      CHECK((s.r[j] > 0.0 && s.r[j] < 1.0));
      CHECK((s.c[j] > -1.0 && s.c[j] < 1.0));
      CHECK((s.h_t[j] > -1.0 && s.h_t[j] < 1.0));
    }
  }
}

TEST_CASE("bigru: zero params, single step and unrolled scalar case") {
  Rng rng(7);
  Tensor seq({4, 1});
  for (auto& v : seq.values()) v = rng.uniform(-1.0, 1.0);

  const GruParams zero = GruParams::zeros(3, 1);
  CHECK(bigru_forward(seq, 4, zero, zero) == std::vector<double>(6, 0.0));
  CHECK_THROWS_AS(bigru_forward(seq, 0, zero, zero), ZeroLength);

  const GruParams f = random_gru(1, 1, rng, 1.0), b = random_gru(1, 1, rng, 1.0);
  BiGruTrace trace;
  const auto one = bigru_forward(seq, 1, f, b, &trace);
  CHECK(trace.forward.size() == 1);
  CHECK(trace.backward.size() == 1);
  CHECK(trace.forward[0].x_t == trace.backward[0].x_t);
  CHECK(one[0] == oracle::gru({0.0}, {seq(0, 0)}, f)[0]);
  CHECK(one[1] == oracle::gru({0.0}, {seq(0, 0)}, b)[0]);

  // Hand iteration of the recurrence, one step at a time.
  std::vector<double> hf{0.0}, hb{0.0};
  for (std::size_t t = 0; t < 4; ++t) hf = oracle::gru(hf, {seq(t, 0)}, f);
  for (std::size_t t = 4; t-- > 0;) hb = oracle::gru(hb, {seq(t, 0)}, b);
  const auto out = bigru_forward(seq, 4, f, b);
  CHECK(out[0] == doctest::Approx(hf[0]).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(hb[0]).epsilon(1e-14));

  // Rows past pooled_length never enter the recurrence.
  Tensor changed = seq;
  changed(3, 0) = 100.0;
  CHECK(bigru_forward(changed, 3, f, b) == bigru_forward(seq, 3, f, b));
}

TEST_CASE("bigru states stay bounded for any parameter magnitude") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor seq({10, 3});
    for (auto& v : seq.values()) v = rng.uniform(-1.0, 1.0);
    const auto out = bigru_forward(seq, 10, random_gru(4, 3, rng, 1.0), random_gru(4, 3, rng, 1.0));
    for (double v : out) CHECK((v > -1.0 && v < 1.0));
  }
  // Saturated gates: strictness is lost to rounding but the closed bound holds.
  for (int trial = 0; trial < 50; ++trial) {
    Tensor seq({10, 3});
    for (auto& v : seq.values()) v = rng.uniform(-10.0, 10.0);
    const auto out = bigru_forward(seq, 10, random_gru(4, 3, rng, 20.0), random_gru(4, 3, rng, 20.0));
    for (double v : out) CHECK((v >= -1.0 && v <= 1.0));
  }
}

TEST_CASE("softmax normalization, shift invariance and overflow safety") {
  const auto p = softmax({1000.0, 0.0});
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] >= 0.0);
  CHECK(std::isfinite(p[1]));
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-50, 50), b = rng.uniform(-50, 50), c = rng.uniform(-100, 100);
    const auto q = softmax({a, b});
    const auto r = softmax({a + c, b + c});
    CHECK(std::abs(q[0] + q[1] - 1.0) <= 1e-9);
    CHECK(std::abs(q[0] - r[0]) <= 1e-9);
    const double s = rng.uniform(0.01, 100.0);
    const auto scaled = softmax({a * s, b * s});
    CHECK((q[1] > q[0]) == (scaled[1] > scaled[0]));
  }
  CHECK(std::isfinite(cross_entropy({1.0, 0.0}, 1)));
  CHECK(cross_entropy({1.0, 0.0}, 1) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("head with zero fc2 outputs one half each") {
  TinyProblem tp = tiny_problem(1);
  tp.params.fc2_weight.fill(0.0);
  tp.params.fc2_bias.fill(0.0);
  tp.params.touch();
  const auto out = head_forward(tp.input, tp.params, tp.config, Mode::Eval, 0);
  CHECK(out.probs[0] == 0.5);
  CHECK(out.probs[1] == 0.5);
}

TEST_CASE("head_forward matches the loop-based oracle on 100 random tiny instances") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TinyProblem tp = tiny_problem(seed);
    const auto out = head_forward(tp.input, tp.params, tp.config, Mode::Eval, seed);
    const auto ref = oracle::head_probs(tp.input, tp.params, tp.config);
    worst = std::max({worst, std::abs(out.probs[0] - ref[0]), std::abs(out.probs[1] - ref[1])});
    CHECK(std::abs(out.probs[0] + out.probs[1] - 1.0) <= 1e-9);

    // Train mode replays the same formulas with the recorded dropout mask.
    const auto tr = head_forward(tp.input, tp.params, tp.config, Mode::Train, seed);
    const auto ref_tr = oracle::head_probs(tp.input, tp.params, tp.config, &tr.cache.keep_scale);
    worst = std::max(worst, std::abs(tr.probs[1] - ref_tr[1]));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("dropout mask is seeded, inverted and absent in Eval") {
  const TinyProblem tp = tiny_problem(3);
  HeadConfig cfg = tp.config;
  cfg.dense = 64;
  const HeadParameters params = HeadParameters::initialize(cfg, 4, 3);
  const auto a = head_forward(tp.input, params, cfg, Mode::Train, 11);
  const auto b = head_forward(tp.input, params, cfg, Mode::Train, 11);
  const auto c = head_forward(tp.input, params, cfg, Mode::Train, 12);
  CHECK(a.cache.keep_scale == b.cache.keep_scale);
  CHECK(a.cache.keep_scale != c.cache.keep_scale);
  for (double m : a.cache.keep_scale) CHECK((m == 0.0 || m == 2.0));
  const auto e1 = head_forward(tp.input, params, cfg, Mode::Eval, 11);
  const auto e2 = head_forward(tp.input, params, cfg, Mode::Eval, 12);
  CHECK(e1.probs == e2.probs);
  for (double m : e1.cache.keep_scale) CHECK(m == 1.0);
}

TEST_CASE("padding rows never change Eval probabilities") {
  Rng rng(10);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const TinyProblem tp = tiny_problem(seed);
    EmbeddingMatrix noisy = tp.input;
    for (std::size_t t = noisy.true_length; t < noisy.length(); ++t) {
      for (std::size_t c = 0; c < noisy.width(); ++c) noisy.values(t, c) = rng.uniform(-5, 5);
    }
    CHECK(head_forward(noisy, tp.params, tp.config, Mode::Eval, 0).probs ==
          head_forward(tp.input, tp.params, tp.config, Mode::Eval, 0).probs);
  }
}

TEST_CASE("head_forward input errors") {
  const TinyProblem tp = tiny_problem(0);
  EmbeddingMatrix empty = tp.input;
  empty.true_length = 0;
  CHECK_THROWS_AS(head_forward(empty, tp.params, tp.config, Mode::Eval, 0), ZeroLength);
  EmbeddingMatrix wide{Tensor({6, 5}), 6};
  CHECK_THROWS_AS(head_forward(wide, tp.params, tp.config, Mode::Eval, 0), DimensionMismatch);
  HeadConfig even = tp.config;
  even.kernel_width = 2;
  CHECK_THROWS_AS(head_forward(tp.input, tp.params, even, Mode::Eval, 0), ConfigMismatch);
}

TEST_CASE("zero incoming gradient gives zero parameter gradients") {
  const TinyProblem tp = tiny_problem(4);
  const auto out = head_forward(tp.input, tp.params, tp.config, Mode::Train, 4);
  const HeadGradients g = head_backward(out.cache, tp.params, std::array<double, 2>{0.0, 0.0});
  for (const auto& [name, t] : g.params.named()) {
    for (double v : t->values()) CHECK(v == 0.0);
  }
  for (double v : g.embedding.values()) CHECK(v == 0.0);
}

TEST_CASE("saturated correct prediction has zero logit gradient") {
  TinyProblem tp = tiny_problem(5);
  tp.params.fc2_weight.fill(0.0);
  tp.params.fc2_bias[0] = 0.0;
  tp.params.fc2_bias[1] = 1000.0;
  tp.params.touch();
  const auto out = head_forward(tp.input, tp.params, tp.config, Mode::Eval, 0);
  REQUIRE(out.probs[1] == 1.0);
  const HeadGradients g = head_backward(out.cache, tp.params, 1);
  CHECK(g.params.fc2_bias[0] == 0.0);
  CHECK(g.params.fc2_bias[1] == 0.0);
  CHECK(cross_entropy(out.probs, 1) == 0.0);
}

TEST_CASE("probability-gradient and label overloads agree for cross-entropy") {
  const TinyProblem tp = tiny_problem(6);
  const auto out = head_forward(tp.input, tp.params, tp.config, Mode::Eval, 0);
  const int y = tp.label;
  std::array<double, 2> dp{0.0, 0.0};
  dp[static_cast<std::size_t>(y)] = -1.0 / out.probs[static_cast<std::size_t>(y)];
  const auto a = head_backward(out.cache, tp.params, dp);
  const auto b = head_backward(out.cache, tp.params, y);
  const auto na = a.params.named(), nb = b.params.named();
  for (std::size_t i = 0; i < na.size(); ++i) {
    for (std::size_t j = 0; j < na[i].second->size(); ++j) {
      CHECK((*na[i].second)[j] == doctest::Approx((*nb[i].second)[j]).epsilon(1e-10));
    }
  }
}

TEST_CASE("stale cache is detected") {
  TinyProblem tp = tiny_problem(7);
  const auto out = head_forward(tp.input, tp.params, tp.config, Mode::Eval, 0);
  HeadParameters copy = tp.params;
  CHECK_NOTHROW(head_backward(out.cache, copy, 0));
  tp.params.fc1_bias[0] += 1.0;
  tp.params.touch();
  CHECK_THROWS_AS(head_backward(out.cache, tp.params, 0), StaleCache);
}

TEST_CASE("gradient check at tiny dims over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TinyProblem tp = tiny_problem(seed);
    const auto r = gradient_check(tp.params, tp.input, tp.label, tp.config, 1e-5, seed);
    INFO("seed " << seed << " worst " << r.worst_coordinate);
    CHECK(r.coordinates == tp.params.parameter_count() + tp.input.values.size());
    CHECK(r.max_relative_error <= 1e-4);
  }
}

TEST_CASE("gradient check with GRU biases and a subsample") {
  TinyProblem tp = tiny_problem(21);
  tp.config.use_bias = true;
  HeadParameters p = HeadParameters::initialize(tp.config, 4, 21);
  Rng rng(21);
  for (auto& [name, t] : p.named()) {
    for (auto& v : t->values()) v = rng.uniform(-1.0, 1.0);
  }
  p.touch();
  const auto r = gradient_check(p, tp.input, 1, tp.config, 1e-5, 3, 50);
  CHECK(r.coordinates == 50);
  CHECK(r.max_relative_error <= 1e-4);
}

TEST_CASE("gradient check at all-zero parameters") {
  const TinyProblem tp = tiny_problem(0);
  const HeadParameters zero = HeadParameters::zeros(tp.config, 4);
  const auto out = head_forward(tp.input, zero, tp.config, Mode::Eval, 0);
  const auto g = head_backward(out.cache, zero, 0);
  // Flat everywhere except the fc2 bias, where the logits see p - onehot.
  for (double v : g.params.fc1_weight.values()) CHECK(v == 0.0);
  for (double v : g.params.fc2_weight.values()) CHECK(v == 0.0);
  CHECK(g.params.fc2_bias[0] == -0.5);
  const auto r = gradient_check(zero, tp.input, 0, tp.config);
  CHECK(r.worst_coordinate.rfind("fc2.bias", 0) == 0);
  CHECK(r.max_relative_error <= 1e-9);
}

TEST_CASE("serial and OpenMP head passes agree") {
  HeadConfig cfg;
  cfg.filters = 8, cfg.hidden = 8, cfg.dense = 8;
  const HeadParameters p = HeadParameters::initialize(cfg, 16, 1);
  Rng rng(12);
  EmbeddingMatrix E{Tensor({30, 16}), 25};
  for (std::size_t i = 0; i < 25 * 16; ++i) E.values[i] = rng.normal();
  const auto a = head_forward(E, p, cfg, Mode::Train, 5, kernels::Backend::Serial);
  const auto b = head_forward(E, p, cfg, Mode::Train, 5, kernels::Backend::OpenMP);
  CHECK(a.probs == b.probs);
  const auto ga = head_backward(a.cache, p, 1, kernels::Backend::Serial);
  const auto gb = head_backward(b.cache, p, 1, kernels::Backend::OpenMP);
  for (std::size_t i = 0; i < ga.embedding.size(); ++i) {
    CHECK(ga.embedding[i] == doctest::Approx(gb.embedding[i]).epsilon(1e-12));
  }
}

TEST_CASE("Glorot initialization is seeded and within limits") {
  const HeadConfig cfg;
  const auto a = HeadParameters::initialize(cfg, 64, 9);
  const auto b = HeadParameters::initialize(cfg, 64, 9);
  const auto c = HeadParameters::initialize(cfg, 64, 10);
  CHECK(a.same_values(b));
  CHECK_FALSE(a.same_values(c));
  const double limit = std::sqrt(6.0 / (3 * 64 + 3 * 128));
  for (double v : a.conv_kernel.values()) CHECK(std::abs(v) <= limit);
  for (double v : a.fc1_bias.values()) CHECK(v == 0.0);
}
