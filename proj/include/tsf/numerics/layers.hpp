#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tsf/numerics/tensor.hpp"

namespace tsf::numerics {

using Rng = std::mt19937_64;

/// A trainable tensor with its Adam moment buffers.
struct Parameter {
  std::string name;
  Tensor tensor;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  Parameter() = default;
  Parameter(std::string name, Tensor values);
};

using ParameterList = std::vector<Parameter*>;

/// He-normal (fan-in) initialised values: N(0, 2 / fan_in).
Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng);

/// y = x Wᵀ + b along the trailing dimension.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t d_in, std::size_t d_out, Rng& rng, bool with_bias = true);

  Tensor operator()(const Tensor& x) const;
  void collect(ParameterList& out);

  std::size_t in_features() const { return weight.tensor.dim(1); }
  std::size_t out_features() const { return weight.tensor.dim(0); }

  Parameter weight;
  Parameter bias;
};

enum class Padding { kCausal, kSame };

/// 1-D convolution over [B, C, L] with length-preserving padding.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t c_in, std::size_t c_out, std::size_t width,
         Padding padding, Rng& rng, bool with_bias = true);

  Tensor operator()(const Tensor& x) const;
  void collect(ParameterList& out);

  std::size_t width() const { return weight.tensor.dim(2); }

  Parameter weight;
  Parameter bias;
  Padding padding = Padding::kCausal;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t features);

  Tensor operator()(const Tensor& x) const;
  void collect(ParameterList& out);

  Parameter gain;
  Parameter shift;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of every parameter from its current gradient.
/// Parameters without a gradient buffer are treated as having a zero gradient.
void adam_step(const ParameterList& params, double lr, const AdamOptions& options = {});

void zero_grad(const ParameterList& params);

std::size_t parameter_count(const ParameterList& params);

}  // namespace tsf::numerics
