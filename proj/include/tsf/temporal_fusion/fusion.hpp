#pragma once

#include <string>

#include "tsf/numerics/layers.hpp"

namespace tsf::temporal_fusion {

using numerics::Tensor;

/// Per-node local fusion: same-length convolution of the primary band plus a
/// 1x1 projection of the secondary band.
class LocalFusion {
 public:
  LocalFusion() = default;
  LocalFusion(const std::string& name, std::size_t c_in, std::size_t c_out, std::size_t width,
              numerics::Rng& rng);

  /// primary/secondary are [B, N, C_in, L]; `secondary` may be undefined.
  Tensor forward(const Tensor& primary, const Tensor& secondary) const;
  void collect(numerics::ParameterList& out);

  numerics::Conv1d conv;
  numerics::Conv1d project;
};

/// pe[t, 2i] = sin(t / 10000^(2i/D)), pe[t, 2i+1] = cos(t / 10000^(2i/D)).
Tensor sinusoidal_encoding(std::size_t length, std::size_t dim);

/// Pre-norm Transformer encoder layer: x + MHA(LN(x)), then x + FF(LN(x)) with ReLU.
/// The key projection has no bias: it would shift every score of a query equally.
class SelfAttentionBlock {
 public:
  SelfAttentionBlock() = default;
  SelfAttentionBlock(const std::string& name, std::size_t dim, std::size_t heads,
                     std::size_t ff_hidden, numerics::Rng& rng);

  /// tokens [B, L, D]; `weights_out` receives [B, heads, L, L].
  Tensor forward(const Tensor& tokens, Tensor* weights_out = nullptr) const;
  void collect(numerics::ParameterList& out);

  std::size_t heads = 4;
  numerics::LayerNorm norm_attn;
  numerics::Linear query;
  numerics::Linear key;
  numerics::Linear value;
  numerics::Linear output;
  numerics::LayerNorm norm_ff;
  numerics::Linear ff_in;
  numerics::Linear ff_out;
};

/// Attention over time for primary [B, C, L]; adds the position encoding first
/// when requested and `secondary` (same shape, may be undefined) to the result.
Tensor global_fusion(const Tensor& primary, const Tensor& secondary, const SelfAttentionBlock& block,
                     bool position_encoding, Tensor* weights_out = nullptr);

}  // namespace tsf::temporal_fusion
