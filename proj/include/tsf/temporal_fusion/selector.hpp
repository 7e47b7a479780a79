#pragma once

#include <string>
#include <vector>

#include "tsf/numerics/layers.hpp"

namespace tsf::temporal_fusion {

using numerics::Tensor;

enum class RoutePolicy { kAdaptive, kForceLow, kForceHigh };

/// Sub-band choice per sample: 0 = low (L), 1 = high (H).
enum Band : int { kLow = 0, kHigh = 1 };

struct SelectorContext {
  bool training = false;
  double tau = 1.0;
  numerics::Rng* rng = nullptr;  // required when training with the adaptive policy
  RoutePolicy policy = RoutePolicy::kAdaptive;
};

struct Selection {
  Tensor primary;
  Tensor secondary;
  Tensor soft_mask;  // [B, 2] values
  std::vector<int> route;  // per sample
};

/// Gumbel(0, 1) draws -log(-log u).
std::vector<double> sample_gumbel(std::size_t n, numerics::Rng& rng);

/// softmax((logits + noise) / τ) over the last axis of logits [B, 2].
Tensor gumbel_softmax(const Tensor& logits, double tau, const std::vector<double>& noise);

/// Forward: one-hot of the row argmax (first index on ties). Backward: identity to `soft`.
Tensor straight_through(const Tensor& soft);

/// Constant one-hot rows for the given choices.
Tensor one_hot_mask(const std::vector<int>& choices, std::size_t classes = 2);

/// primary = m0·low + m1·high, secondary = m1·low + m0·high with mask [B, 2].
std::pair<Tensor, Tensor> route_mix(const Tensor& low, const Tensor& high, const Tensor& mask);

/// Pools both sub-bands to channel descriptors, maps concat(d_L, d_H) [B, 2C] to
/// two logits and picks one sub-band per sample.
class FrequencySelector {
 public:
  FrequencySelector() = default;
  FrequencySelector(const std::string& name, std::size_t channels, numerics::Rng& rng);

  /// low/high are [B, C, L] or [B, N, C, L].
  Tensor logits(const Tensor& low, const Tensor& high) const;
  Selection select(const Tensor& low, const Tensor& high, const SelectorContext& ctx) const;
  void collect(numerics::ParameterList& out);

  numerics::Linear squeeze;
};

}  // namespace tsf::temporal_fusion
