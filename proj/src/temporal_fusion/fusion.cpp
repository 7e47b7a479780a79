#include "tsf/temporal_fusion/fusion.hpp"

#include <cmath>

#include "tsf/numerics/ops.hpp"

namespace tsf::temporal_fusion {

using numerics::DimensionError;

LocalFusion::LocalFusion(const std::string& name, std::size_t c_in, std::size_t c_out,
                         std::size_t width, numerics::Rng& rng)
    : conv(name + "/conv", c_in, c_out, width, numerics::Padding::kSame, rng),
      project(name + "/project", c_in, c_out, 1, numerics::Padding::kSame, rng, false) {}

Tensor LocalFusion::forward(const Tensor& primary, const Tensor& secondary) const {
  if (primary.rank() != 4) throw DimensionError("local fusion: expected [B, N, C, L]");
  const std::size_t b = primary.dim(0), n = primary.dim(1), c = primary.dim(2), len = primary.dim(3);
  if (c != conv.weight.tensor.dim(1)) {
    throw DimensionError("local fusion: expected " + std::to_string(conv.weight.tensor.dim(1)) +
                         " input channels, got " + std::to_string(c));
  }
  const std::size_t c_out = conv.weight.tensor.dim(0);
  Tensor y = conv(primary.reshape({b * n, c, len}));
  if (secondary.defined()) {
    if (secondary.shape() != primary.shape()) {
      throw DimensionError("local fusion: secondary shape must match primary");
    }
    y = numerics::add(y, project(secondary.reshape({b * n, c, len})));
  }
  return y.reshape({b, n, c_out, len});
}

void LocalFusion::collect(numerics::ParameterList& out) {
  conv.collect(out);
  project.collect(out);
}

Tensor sinusoidal_encoding(std::size_t length, std::size_t dim) {
  std::vector<double> pe(length * dim);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(t) * rate;
      pe[t * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return Tensor({length, dim}, std::move(pe));
}

SelfAttentionBlock::SelfAttentionBlock(const std::string& name, std::size_t dim, std::size_t h,
                                       std::size_t ff_hidden, numerics::Rng& rng)
    : heads(h),
      norm_attn(name + "/norm_attn", dim),
      query(name + "/query", dim, dim, rng),
      key(name + "/key", dim, dim, rng, false),
      value(name + "/value", dim, dim, rng),
      output(name + "/output", dim, dim, rng),
      norm_ff(name + "/norm_ff", dim),
      ff_in(name + "/ff_in", dim, ff_hidden, rng),
      ff_out(name + "/ff_out", ff_hidden, dim, rng) {
  if (h == 0 || dim % h != 0) throw DimensionError("self-attention: heads must divide the width");
}

Tensor SelfAttentionBlock::forward(const Tensor& tokens, Tensor* weights_out) const {
  if (tokens.rank() != 3) throw DimensionError("self-attention: expected [B, L, D]");
  if (tokens.dim(1) < 1) throw DimensionError("self-attention: empty sequence");
  const Tensor a = norm_attn(tokens);
  const Tensor mixed = numerics::multi_head_attention(query(a), key(a), value(a), heads, weights_out);
  const Tensor x = numerics::add(tokens, output(mixed));
  return numerics::add(x, ff_out(numerics::relu(ff_in(norm_ff(x)))));
}

void SelfAttentionBlock::collect(numerics::ParameterList& out) {
  norm_attn.collect(out);
  query.collect(out);
  key.collect(out);
  value.collect(out);
  output.collect(out);
  norm_ff.collect(out);
  ff_in.collect(out);
  ff_out.collect(out);
}

Tensor global_fusion(const Tensor& primary, const Tensor& secondary, const SelfAttentionBlock& block,
                     bool position_encoding, Tensor* weights_out) {
  if (primary.rank() != 3) throw DimensionError("global fusion: expected [B, C, L]");
  if (primary.dim(2) < 1) throw DimensionError("global fusion: empty sequence");
  Tensor tokens = numerics::permute(primary, {0, 2, 1});
  if (position_encoding) {
    tokens = numerics::add(tokens, sinusoidal_encoding(tokens.dim(1), tokens.dim(2)));
  }
  Tensor y = numerics::permute(block.forward(tokens, weights_out), {0, 2, 1});
  if (secondary.defined()) {
    if (secondary.shape() != primary.shape()) {
      throw DimensionError("global fusion: secondary shape must match primary");
    }
    y = numerics::add(y, secondary);
  }
  return y;
}

}  // namespace tsf::temporal_fusion
