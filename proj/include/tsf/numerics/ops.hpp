#pragma once

#include <cstddef>
#include <vector>

#include "tsf/numerics/tensor.hpp"

namespace tsf::numerics {

// Elementwise arithmetic with numpy-style broadcasting (shapes are right-aligned;
// each dimension must match or be 1 on one side).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);

/// Sum of all elements, as a scalar tensor.
Tensor sum(const Tensor& x);
/// Mean over one axis; the axis is removed from the result.
Tensor mean(const Tensor& x, std::size_t axis);
/// Softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Layer normalisation over the trailing dimension followed by an affine
/// gain/shift of length D.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-5);

/// Affine map along the trailing dimension: y = x Wᵀ + b with W of shape
/// [D_out, D_in]. `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// 1-D convolution (cross-correlation) of x [B, C_in, L] with w [C_out, C_in, W]
/// using explicit zero padding. Output length is L + pad_left + pad_right - W + 1.
/// `bias` may be undefined. A rank-2 input [C_in, L] is treated as B = 1 and the
/// result is returned at rank 2.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t pad_left,
              std::size_t pad_right);

/// Causal convolution: output[t] sees input[t-W+1 .. t] with W-1 samples of
/// left zero padding, so the length is preserved.
Tensor causal_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Length-preserving non-causal convolution with (W-1)/2 samples on the left.
Tensor same_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Batched matrix product: a [G, M, K] x b [G, K, N] -> [G, M, N].
Tensor bmm(const Tensor& a, const Tensor& b);

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

/// Scaled dot-product attention over q, k, v [B, L, D] split into `heads`
/// contiguous head slices. Returns the mixed values [B, L, D]; when
/// `weights_out` is non-null it receives the row-stochastic attention
/// weights [B, heads, L, L] (values only).
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                            Tensor* weights_out = nullptr);

/// Mean over the batch of -Σ_c target[b, c] · log softmax(logits[b])_c.
/// Targets are constants (soft labels allowed).
Tensor cross_entropy(const Tensor& logits, const Tensor& targets);

}  // namespace tsf::numerics
