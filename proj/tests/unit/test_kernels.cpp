#include <doctest.h>

#include "oracle/head_oracle.hpp"
#include "snprex/errors.hpp"
#include "snprex/kernels.hpp"
#include "snprex/rng.hpp"

using namespace snprex;
using kernels::Backend;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("conv1d with zero kernel and bias is zero") {
  Rng rng(1);
  const Tensor E = random_tensor({5, 3}, rng);
  const Tensor out = kernels::conv1d_forward(E, 5, Tensor({3, 3, 2}), Tensor({2}));
  CHECK(out == Tensor({5, 2}));
}

TEST_CASE("conv1d k=1 identity filter is ReLU of channel 0") {
  Rng rng(2);
  const Tensor E = random_tensor({6, 3}, rng);
  Tensor K({1, 3, 1});
  K(0, 0, 0) = 1.0;
  const Tensor out = kernels::conv1d_forward(E, 6, K, Tensor({1}));
  for (std::size_t t = 0; t < 6; ++t) CHECK(out(t, 0) == std::max(0.0, E(t, 0)));
}

TEST_CASE("conv1d matches the brute-force oracle") {
  Rng rng(3);
  const Tensor E = random_tensor({5, 3}, rng);
  const Tensor K = random_tensor({3, 3, 2}, rng);
  const Tensor b = random_tensor({2}, rng);
  const auto expected = oracle::conv(oracle::to_mat(E), 5, K, b);
  for (Backend be : {Backend::Serial, Backend::OpenMP}) {
    const Tensor out = kernels::conv1d_forward(E, 5, K, b, be);
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t f = 0; f < 2; ++f) CHECK(out(t, f) == doctest::Approx(expected[t][f]).epsilon(1e-14));
    }
  }
  // Masked rows behave as zeros.
  const auto masked = oracle::conv(oracle::to_mat(E), 3, K, b);
  const Tensor out = kernels::conv1d_forward(E, 3, K, b);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t f = 0; f < 2; ++f) CHECK(out(t, f) == doctest::Approx(masked[t][f]).epsilon(1e-14));
  }
}

TEST_CASE("conv1d rejects inconsistent shapes") {
  CHECK_THROWS_AS(kernels::conv1d_forward(Tensor({4, 3}), 4, Tensor({3, 2, 2}), Tensor({2})), DimensionMismatch);
}

TEST_CASE("serial and OpenMP conv agree forward and backward") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t L = 5 + rng.below(40), d = 1 + rng.below(20), F = 1 + rng.below(20), k = 1 + 2 * rng.below(3);
    const std::size_t valid = 1 + rng.below(L);
    const Tensor E = random_tensor({L, d}, rng), K = random_tensor({k, d, F}, rng), b = random_tensor({F}, rng);
    const Tensor s = kernels::conv1d_forward(E, valid, K, b, Backend::Serial);
    const Tensor o = kernels::conv1d_forward(E, valid, K, b, Backend::OpenMP);
    CHECK(max_abs_diff(s, o) == 0.0);

    const Tensor d_out = random_tensor({L, F}, rng);
    Tensor dK1(K.shape()), db1(b.shape()), dE1(E.shape());
    Tensor dK2(K.shape()), db2(b.shape()), dE2(E.shape());
    kernels::conv1d_backward(E, valid, K, s, d_out, dK1, db1, dE1, Backend::Serial);
    kernels::conv1d_backward(E, valid, K, s, d_out, dK2, db2, dE2, Backend::OpenMP);
    CHECK(max_abs_diff(dK1, dK2) < 1e-12);
    CHECK(max_abs_diff(db1, db2) < 1e-12);
    CHECK(max_abs_diff(dE1, dE2) < 1e-12);
    for (std::size_t r = valid; r < L; ++r) {
      for (std::size_t c = 0; c < d; ++c) CHECK(dE1(r, c) == 0.0);
    }
  }
}

TEST_CASE("maxpool examples") {
  Tensor M({4, 1});
  M(0, 0) = 1, M(1, 0) = 3, M(2, 0) = 2, M(3, 0) = 5;
  const Tensor p = kernels::maxpool(M, 2, 2, 4);
  REQUIRE(p.dim(0) == 2);
  CHECK(p(0, 0) == 3);
  CHECK(p(1, 0) == 5);
  CHECK(kernels::maxpool(M, 1, 1, 4) == M);
  // Ragged last window and a shorter valid prefix.
  CHECK(kernels::maxpool(M, 2, 2, 3).dim(0) == 2);
  CHECK(kernels::maxpool(M, 2, 2, 3)(1, 0) == 2);
}

TEST_CASE("maxpool matches the brute-force oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor M = random_tensor({7, 2}, rng);
    const std::size_t window = 1 + rng.below(3), stride = 1 + rng.below(3), valid = 1 + rng.below(7);
    const auto expected = oracle::pool(oracle::to_mat(M), valid, window, stride);
    std::vector<std::size_t> argmax;
    const Tensor got = kernels::maxpool(M, window, stride, valid, &argmax);
    REQUIRE(got.dim(0) == expected.size());
    CHECK(got.dim(0) == (valid + stride - 1) / stride);
    for (std::size_t p = 0; p < expected.size(); ++p) {
      for (std::size_t f = 0; f < 2; ++f) {
        CHECK(got(p, f) == expected[p][f]);
        CHECK(M(argmax[p * 2 + f], f) == got(p, f));
      }
    }
  }
}

TEST_CASE("maxpool backward routes to the argmax") {
  Tensor M({4, 1});
  M(0, 0) = 1, M(1, 0) = 3, M(2, 0) = 2, M(3, 0) = 5;
  std::vector<std::size_t> argmax;
  const Tensor p = kernels::maxpool(M, 2, 2, 4, &argmax);
  Tensor d({2, 1});
  d(0, 0) = 7, d(1, 0) = 11;
  const Tensor dM = kernels::maxpool_backward(d, argmax, 4);
  CHECK(dM(0, 0) == 0);
  CHECK(dM(1, 0) == 7);
  CHECK(dM(2, 0) == 0);
  CHECK(dM(3, 0) == 11);
}
