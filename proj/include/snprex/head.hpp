#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "snprex/kernels.hpp"
#include "snprex/tensor.hpp"

namespace snprex {

struct HeadConfig {
  std::size_t kernel_width = 3;
  std::size_t filters = 128;
  std::size_t hidden = 128;  // per GRU direction
  std::size_t dense = 128;
  std::size_t pool_window = 2;
  std::size_t pool_stride = 2;
  double dropout_p = 0.5;
  bool use_bias = false;  // GRU gate biases

  /// The small dimensions used by the gradient and oracle checks.
  static HeadConfig tiny();
  /// Throws ConfigMismatch on an even kernel width, zero sizes or p outside [0, 1).
  void validate() const;
  bool operator==(const HeadConfig&) const = default;
};

struct GruParams {
  Tensor W_z, W_r, W_c;  // H x H
  Tensor U_z, U_r, U_c;  // H x d_in
  bool use_bias = false;
  Tensor b_z, b_r, b_c;  // H, empty unless use_bias

  static GruParams zeros(std::size_t hidden, std::size_t input, bool use_bias = false);
  std::size_t hidden() const { return W_z.rank() ? W_z.dim(0) : 0; }
  std::size_t input() const { return U_z.rank() ? U_z.dim(1) : 0; }
  /// Throws DimensionMismatch when the six matrices disagree.
  void check() const;
  bool operator==(const GruParams&) const = default;
};

struct GruStep {
  std::vector<double> x_t, h_prev, z, r, c, h_t;
};

/// One GRU update: z = s(W_z h + U_z x), r = s(W_r h + U_r x),
/// c = tanh(W_c (h * r) + U_c x), h' = z * c + (1 - z) * h.
GruStep gru_cell(std::span<const double> h_prev, std::span<const double> x_t, const GruParams& p);

struct BiGruTrace {
  std::vector<GruStep> forward;   // rows 0 .. n-1
  std::vector<GruStep> backward;  // rows n-1 .. 0
};

/// Runs both directions over the first `pooled_length` rows of `seq` from a
/// zero state and returns [h_fwd(last row), h_bwd(row 0)]. Throws ZeroLength
/// when pooled_length is 0.
std::vector<double> bigru_forward(const Tensor& seq, std::size_t pooled_length, const GruParams& fwd,
                                  const GruParams& bwd, BiGruTrace* trace = nullptr);

struct HeadParameters {
  Tensor conv_kernel;  // k x d x F
  Tensor conv_bias;    // F
  GruParams gru_fwd, gru_bwd;
  Tensor fc1_weight;  // D1 x 2H
  Tensor fc1_bias;    // D1
  Tensor fc2_weight;  // 2 x D1
  Tensor fc2_bias;    // 2

  /// Content version. Mutating a tensor obtained from named() must be followed
  /// by touch(); caches built under another version are rejected.
  std::uint64_t version = 0;

  static HeadParameters zeros(const HeadConfig& cfg, std::size_t input_dim);
  /// Glorot-uniform weights and zero biases drawn from `seed`.
  static HeadParameters initialize(const HeadConfig& cfg, std::size_t input_dim, std::uint64_t seed);

  std::size_t input_dim() const { return conv_kernel.rank() == 3 ? conv_kernel.dim(1) : 0; }
  void touch();
  /// Throws DimensionMismatch unless every tensor agrees with cfg and input_dim.
  void check(const HeadConfig& cfg, std::size_t input_dim) const;

  /// Stable names ("conv.kernel", "gru_fwd.W_z", ...), in a fixed order.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  std::size_t parameter_count() const;

  bool same_values(const HeadParameters& o) const;
};

enum class Mode { Train, Eval };

/// Everything head_backward needs, local to one instance.
struct HeadCache {
  Mode mode = Mode::Eval;
  std::uint64_t params_version = 0;
  HeadConfig config;
  EmbeddingMatrix input;
  Tensor conv_out;
  std::vector<std::size_t> pool_argmax;
  Tensor pooled;
  BiGruTrace gru;
  std::vector<double> gru_out;    // 2H
  std::vector<double> fc1_out;    // after ReLU
  std::vector<double> keep_scale; // dropout multipliers, 1 in Eval
  std::vector<double> dense_out;  // fc1_out * keep_scale
  std::array<double, 2> logits{};
  std::array<double, 2> probs{};
};

struct HeadOutput {
  std::array<double, 2> probs{};
  HeadCache cache;
};

/// conv -> maxpool -> BiGRU -> fc1 + ReLU -> dropout (Train only) -> fc2 ->
/// softmax. Only the first true_length rows of E are read. The dropout mask
/// comes from `seed`.
HeadOutput head_forward(const EmbeddingMatrix& E, const HeadParameters& params, const HeadConfig& cfg, Mode mode,
                        std::uint64_t seed, kernels::Backend backend = kernels::Backend::Serial);

std::array<double, 2> softmax(std::array<double, 2> logits);
/// -log(max(p_label, 1e-12))
double cross_entropy(const std::array<double, 2>& probs, int label);

struct HeadGradients {
  HeadParameters params;  // same layout as the parameters
  Tensor embedding;       // L x d
};

/// Exact gradients of the loss whose derivative with respect to the output
/// probabilities is `grad_probs`. Throws StaleCache when params changed since
/// the forward pass.
HeadGradients head_backward(const HeadCache& cache, const HeadParameters& params, std::array<double, 2> grad_probs,
                            kernels::Backend backend = kernels::Backend::Serial);
/// Cross-entropy against `label`: gradient at the logits is probs - onehot.
HeadGradients head_backward(const HeadCache& cache, const HeadParameters& params, int label,
                            kernels::Backend backend = kernels::Backend::Serial);

/// Accumulates `src` into `dst` tensor by tensor.
void accumulate(HeadParameters& dst, const HeadParameters& src, double scale = 1.0);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_coordinate;
  std::size_t coordinates = 0;
};

/// Central differences over every parameter coordinate and every embedding
/// entry (or a seeded subsample of `max_coordinates` when non-zero), in Eval
/// mode, against head_backward for the cross-entropy loss.
GradientCheckResult gradient_check(const HeadParameters& params, const EmbeddingMatrix& E, int label,
                                   const HeadConfig& cfg, double eps = 1e-5, std::uint64_t seed = 0,
                                   std::size_t max_coordinates = 0);

/// Random tiny problem (L=6, d=4, HeadConfig::tiny()) drawn from `seed`.
struct TinyProblem {
  HeadConfig config;
  HeadParameters params;
  EmbeddingMatrix input;
  int label = 0;
};
TinyProblem tiny_problem(std::uint64_t seed);

}  // namespace snprex
