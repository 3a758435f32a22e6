#include "snprex/kernels.hpp"

#include <algorithm>

#include "snprex/errors.hpp"

namespace snprex::kernels {

namespace {

void check_conv(const Tensor& E, const Tensor& K, const Tensor& b) {
  if (E.rank() != 2 || K.rank() != 3 || b.rank() != 1 || K.dim(1) != E.dim(1) || b.dim(0) != K.dim(2)) {
    throw DimensionMismatch("conv1d: input " + shape_string(E.shape()) + ", kernel " + shape_string(K.shape()) +
                            ", bias " + shape_string(b.shape()));
  }
}

// Source row for output row t and tap j, or -1 when it falls outside [0, valid).
inline long source_row(std::size_t t, std::size_t j, std::size_t half, std::size_t valid) {
  const long s = static_cast<long>(t) + static_cast<long>(j) - static_cast<long>(half);
  return (s < 0 || s >= static_cast<long>(valid)) ? -1 : s;
}

}  // namespace

Tensor conv1d_forward(const Tensor& E, std::size_t valid_rows, const Tensor& K, const Tensor& b, Backend backend) {
  check_conv(E, K, b);
  const std::size_t L = E.dim(0), d = E.dim(1), k = K.dim(0), F = K.dim(2), half = k / 2;
  const std::size_t valid = std::min(valid_rows, L);
  Tensor out({L, F});

  auto row = [&](std::size_t t) {
    double* o = &out(t, 0);
    for (std::size_t f = 0; f < F; ++f) o[f] = b[f];
    for (std::size_t j = 0; j < k; ++j) {
      const long s = source_row(t, j, half, valid);
      if (s < 0) continue;
      const double* e = &E(static_cast<std::size_t>(s), 0);
      for (std::size_t c = 0; c < d; ++c) {
        const double ec = e[c];
        if (ec == 0.0) continue;
        const double* kr = &K(j, c, 0);
        for (std::size_t f = 0; f < F; ++f) o[f] += kr[f] * ec;
      }
    }
    for (std::size_t f = 0; f < F; ++f) o[f] = std::max(0.0, o[f]);
  };

  if (backend == Backend::OpenMP) {
#pragma omp parallel for schedule(static)
    for (std::size_t t = 0; t < L; ++t) row(t);
  } else {
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        double acc = b[f];
        for (std::size_t j = 0; j < k; ++j) {
          const long s = source_row(t, j, half, valid);
          if (s < 0) continue;
          for (std::size_t c = 0; c < d; ++c) acc += K(j, c, f) * E(static_cast<std::size_t>(s), c);
        }
        out(t, f) = std::max(0.0, acc);
      }
    }
  }
  return out;
}

void conv1d_backward(const Tensor& E, std::size_t valid_rows, const Tensor& K, const Tensor& out, const Tensor& d_out,
                     Tensor& dK, Tensor& db, Tensor& dE, Backend backend) {
  check_conv(E, K, db);
  if (!out.same_shape(d_out) || !dK.same_shape(K) || !dE.same_shape(E)) {
    throw DimensionMismatch("conv1d_backward: inconsistent gradient shapes");
  }
  const std::size_t L = E.dim(0), d = E.dim(1), k = K.dim(0), F = K.dim(2), half = k / 2;
  const std::size_t valid = std::min(valid_rows, L);

  // Gradient at the pre-activation; zero where ReLU was inactive.
  Tensor g({L, F});
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = out[i] > 0.0 ? d_out[i] : 0.0;

  if (backend == Backend::Serial) {
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        const double gt = g(t, f);
        if (gt == 0.0) continue;
        db[f] += gt;
        for (std::size_t j = 0; j < k; ++j) {
          const long s = source_row(t, j, half, valid);
          if (s < 0) continue;
          const auto su = static_cast<std::size_t>(s);
          for (std::size_t c = 0; c < d; ++c) {
            dK(j, c, f) += gt * E(su, c);
            dE(su, c) += gt * K(j, c, f);
          }
        }
      }
    }
    return;
  }

  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t f = 0; f < F; ++f) db[f] += g(t, f);
  }
  // dK: each (j, c) row of the kernel is owned by one iteration.
#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      double* dk = &dK(j, c, 0);
      for (std::size_t t = 0; t < L; ++t) {
        const long s = source_row(t, j, half, valid);
        if (s < 0) continue;
        const double e = E(static_cast<std::size_t>(s), c);
        if (e == 0.0) continue;
        const double* gr = &g(t, 0);
        for (std::size_t f = 0; f < F; ++f) dk[f] += gr[f] * e;
      }
    }
  }
  // dE: each source row is owned by one iteration.
#pragma omp parallel for schedule(static)
  for (std::size_t s = 0; s < valid; ++s) {
    double* de = &dE(s, 0);
    for (std::size_t j = 0; j < k; ++j) {
      const long t = static_cast<long>(s) - static_cast<long>(j) + static_cast<long>(half);
      if (t < 0 || t >= static_cast<long>(L)) continue;
      const double* gr = &g(static_cast<std::size_t>(t), 0);
      for (std::size_t c = 0; c < d; ++c) {
        const double* kr = &K(j, c, 0);
        double acc = 0.0;
        for (std::size_t f = 0; f < F; ++f) acc += kr[f] * gr[f];
        de[c] += acc;
      }
    }
  }
}

Tensor maxpool(const Tensor& M, std::size_t window, std::size_t stride, std::size_t valid_rows,
               std::vector<std::size_t>* argmax) {
  if (window == 0 || stride == 0) throw ConfigMismatch("maxpool window and stride must be at least 1");
  const std::size_t F = M.dim(1);
  const std::size_t valid = std::min(valid_rows, M.dim(0));
  const std::size_t P = (valid + stride - 1) / stride;
  Tensor out({P, F});
  if (argmax) argmax->assign(P * F, 0);
  for (std::size_t p = 0; p < P; ++p) {
    const std::size_t begin = p * stride;
    const std::size_t end = std::min(begin + window, valid);
    for (std::size_t f = 0; f < F; ++f) {
      std::size_t best = begin;
      for (std::size_t t = begin + 1; t < end; ++t) {
        if (M(t, f) > M(best, f)) best = t;
      }
      out(p, f) = M(best, f);
      if (argmax) (*argmax)[p * F + f] = best;
    }
  }
  return out;
}

Tensor maxpool_backward(const Tensor& d_pooled, const std::vector<std::size_t>& argmax, std::size_t rows) {
  const std::size_t P = d_pooled.dim(0), F = d_pooled.dim(1);
  Tensor dM({rows, F});
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t f = 0; f < F; ++f) dM(argmax[p * F + f], f) += d_pooled(p, f);
  }
  return dM;
}

void matvec(const Tensor& W, std::span<const double> x, std::span<double> y) {
  std::fill(y.begin(), y.end(), 0.0);
  matvec_acc(W, x, y);
}

void matvec_acc(const Tensor& W, std::span<const double> x, std::span<double> y) {
  const std::size_t m = W.dim(0), n = W.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double* w = &W(i, 0);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += w[j] * x[j];
    y[i] += acc;
  }
}

void matvec_t_acc(const Tensor& W, std::span<const double> dy, std::span<double> dx) {
  const std::size_t m = W.dim(0), n = W.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double g = dy[i];
    if (g == 0.0) continue;
    const double* w = &W(i, 0);
    for (std::size_t j = 0; j < n; ++j) dx[j] += w[j] * g;
  }
}

void outer_acc(Tensor& dW, std::span<const double> dy, std::span<const double> x) {
  const std::size_t m = dW.dim(0), n = dW.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double g = dy[i];
    if (g == 0.0) continue;
    double* w = &dW(i, 0);
    for (std::size_t j = 0; j < n; ++j) w[j] += g * x[j];
  }
}

}  // namespace snprex::kernels
