#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "snprex/tensor.hpp"

/// Numeric kernels behind the head. Each parallel kernel has a serial
/// reference with the plainest loop order; tests compare the two.
namespace snprex::kernels {

enum class Backend { Serial, OpenMP };

/// Same-padded 1-D convolution over time with ReLU. E is L x d, K is k x d x F,
/// b has F entries. Input rows at positions >= valid_rows read as zero.
/// Returns L x F.
Tensor conv1d_forward(const Tensor& E, std::size_t valid_rows, const Tensor& K, const Tensor& b,
                      Backend backend = Backend::Serial);

/// Accumulates gradients of conv1d_forward given its output `out` and the
/// upstream gradient d_out. dE rows >= valid_rows are left untouched.
void conv1d_backward(const Tensor& E, std::size_t valid_rows, const Tensor& K, const Tensor& out, const Tensor& d_out,
                     Tensor& dK, Tensor& db, Tensor& dE, Backend backend = Backend::Serial);

/// Temporal max-pooling over the first `valid_rows` rows of M. Output has
/// ceil(valid_rows / stride) rows; the final window may be ragged. `argmax`
/// receives the source row of each output cell (first maximum on ties).
Tensor maxpool(const Tensor& M, std::size_t window, std::size_t stride, std::size_t valid_rows,
               std::vector<std::size_t>* argmax = nullptr);

/// Scatters d_pooled back onto an L x F gradient through argmax.
Tensor maxpool_backward(const Tensor& d_pooled, const std::vector<std::size_t>& argmax, std::size_t rows);

/// y = W x (W is m x n).
void matvec(const Tensor& W, std::span<const double> x, std::span<double> y);
/// y += W x
void matvec_acc(const Tensor& W, std::span<const double> x, std::span<double> y);
/// dx += W^T dy
void matvec_t_acc(const Tensor& W, std::span<const double> dy, std::span<double> dx);
/// dW += dy x^T
void outer_acc(Tensor& dW, std::span<const double> dy, std::span<const double> x);

}  // namespace snprex::kernels
