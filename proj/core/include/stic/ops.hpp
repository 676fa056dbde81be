#ifndef STIC_OPS_HPP
#define STIC_OPS_HPP

#include <vector>

#include "stic/rng.hpp"
#include "stic/tensor.hpp"

namespace stic {

// Elementwise binary ops. Shapes must match exactly, except that either side
// may be a scalar (numel 1), which broadcasts. Anything else is rejected with
// a diagnostic naming both shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scalar_mul(const Tensor& a, double c);

/// 2-D matrix product (m x k) * (k x n).
Tensor matmul(const Tensor& a, const Tensor& b);

/// 2-D convolution over an input of shape (C_in, H, W) with kernels of shape
/// (C_out, C_in, kh, kw), zero padding, stride 1 or 2. `bias`, when defined,
/// has shape (C_out) and is added per output channel.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding);

/// Transposed 2-D convolution (the adjoint of conv2d): input (C_in, H, W),
/// weight (C_in, C_out, kh, kw), output (C_out, (H-1)*stride + kh - 2*padding, ...).
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride, int padding);

// Elementwise unaries.
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);

/// log(sum(exp(x))) reduced along `axis`, max-shifted for stability. The
/// reduced axis is dropped from the output shape (scalar for rank-1 input).
Tensor logsumexp(const Tensor& a, int axis);

/// Softmax along `axis`; output shape equals input shape.
Tensor softmax(const Tensor& a, int axis);

/// -sum_c target_c * log softmax(logits)_c for a rank-1 logits vector.
/// `target` must be a distribution over the same length (sum 1 within 1e-9).
Tensor cross_entropy_soft(const Tensor& logits, const Tensor& target);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, const Shape& new_shape);

/// 2-D transpose.
Tensor transpose(const Tensor& a);

/// Concatenate along `axis`; all other dimensions must agree.
Tensor concat(const std::vector<Tensor>& parts, int axis);

/// Leaf filled with independent N(mean, stddev^2) draws.
Tensor random_normal(const Shape& shape, Rng& rng, double mean = 0.0, double stddev = 1.0,
                     bool requires_grad = false);

/// Leaf with independent uniform draws in [lo, hi).
Tensor random_uniform(const Shape& shape, Rng& rng, double lo, double hi,
                      bool requires_grad = false);

}  // namespace stic

#endif  // STIC_OPS_HPP
