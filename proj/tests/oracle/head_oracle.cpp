#include "oracle/head_oracle.hpp"

#include <cmath>

namespace snprex::oracle {

namespace {

double el(const Tensor& t, std::size_t i, std::size_t j) { return t.data()[i * t.shape()[1] + j]; }

double sig(double a) { return 1.0 / (1.0 + std::exp(-a)); }

std::vector<double> affine(const Tensor& W, const std::vector<double>& x) {
  std::vector<double> y(W.shape()[0], 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += el(W, i, j) * x[j];
  }
  return y;
}

}  // namespace

Mat to_mat(const Tensor& t) {
  Mat m(t.shape()[0], std::vector<double>(t.shape()[1]));
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[i].size(); ++j) m[i][j] = el(t, i, j);
  }
  return m;
}

Mat conv(const Mat& X, std::size_t valid, const Tensor& K, const Tensor& b) {
  const std::size_t k = K.shape()[0], d = K.shape()[1], F = K.shape()[2];
  Mat out(X.size(), std::vector<double>(F));
  for (std::size_t t = 0; t < X.size(); ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      double s = b.data()[f];
      for (std::size_t j = 0; j < k; ++j) {
        const long src = static_cast<long>(t + j) - static_cast<long>(k / 2);
        if (src < 0 || src >= static_cast<long>(valid)) continue;
        for (std::size_t c = 0; c < d; ++c) s += K.data()[(j * d + c) * F + f] * X[static_cast<std::size_t>(src)][c];
      }
      out[t][f] = s > 0 ? s : 0.0;
    }
  }
  return out;
}

Mat pool(const Mat& M, std::size_t valid, std::size_t window, std::size_t stride) {
  Mat out;
  for (std::size_t start = 0; start < valid; start += stride) {
    std::vector<double> row = M[start];
    for (std::size_t t = start + 1; t < start + window && t < valid; ++t) {
      for (std::size_t f = 0; f < row.size(); ++f) row[f] = std::max(row[f], M[t][f]);
    }
    out.push_back(row);
  }
  return out;
}

std::vector<double> gru(const std::vector<double>& h, const std::vector<double>& x, const GruParams& p) {
  const std::size_t H = h.size();
  std::vector<double> az = affine(p.W_z, h), uz = affine(p.U_z, x);
  std::vector<double> ar = affine(p.W_r, h), ur = affine(p.U_r, x);
  std::vector<double> z(H), r(H), hr(H), out(H);
  for (std::size_t i = 0; i < H; ++i) {
    z[i] = sig(az[i] + uz[i] + (p.use_bias ? p.b_z.data()[i] : 0.0));
    r[i] = sig(ar[i] + ur[i] + (p.use_bias ? p.b_r.data()[i] : 0.0));
    hr[i] = h[i] * r[i];
  }
  std::vector<double> ac = affine(p.W_c, hr), uc = affine(p.U_c, x);
  for (std::size_t i = 0; i < H; ++i) {
    const double c = std::tanh(ac[i] + uc[i] + (p.use_bias ? p.b_c.data()[i] : 0.0));
    out[i] = z[i] * c + (1 - z[i]) * h[i];
  }
  return out;
}

std::array<double, 2> head_probs(const EmbeddingMatrix& E, const HeadParameters& params, const HeadConfig& cfg,
                                 const std::vector<double>* keep_scale) {
  const std::size_t n = E.true_length;
  const Mat X = to_mat(E.values);
  const Mat C = conv(X, n, params.conv_kernel, params.conv_bias);
  const Mat P = pool(C, n, cfg.pool_window, cfg.pool_stride);

  std::vector<double> hf(cfg.hidden, 0.0), hb(cfg.hidden, 0.0);
  for (std::size_t t = 0; t < P.size(); ++t) hf = gru(hf, P[t], params.gru_fwd);
  for (std::size_t t = P.size(); t > 0; --t) hb = gru(hb, P[t - 1], params.gru_bwd);
  std::vector<double> h = hf;
  h.insert(h.end(), hb.begin(), hb.end());

  std::vector<double> a = affine(params.fc1_weight, h);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] += params.fc1_bias.data()[i];
    a[i] = a[i] > 0 ? a[i] : 0.0;
    if (keep_scale) a[i] *= (*keep_scale)[i];
  }
  std::vector<double> z = affine(params.fc2_weight, a);
  z[0] += params.fc2_bias.data()[0];
  z[1] += params.fc2_bias.data()[1];
  // Two-class softmax as a logistic function of the logit gap.
  const double p1 = z[1] >= z[0] ? 1.0 / (1.0 + std::exp(z[0] - z[1])) : std::exp(z[1] - z[0]) / (1.0 + std::exp(z[1] - z[0]));
  return {1.0 - p1, p1};
}

}  // namespace snprex::oracle
