#include "tsf/temporal_fusion/selector.hpp"

#include <cmath>
#include <limits>

#include "tsf/numerics/ops.hpp"

namespace tsf::temporal_fusion {

using numerics::ContractError;
using numerics::DimensionError;
using numerics::Shape;

std::vector<double> sample_gumbel(std::size_t n, numerics::Rng& rng) {
  std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
  std::vector<double> g(n);
  for (double& v : g) v = -std::log(-std::log(u(rng)));
  return g;
}

Tensor gumbel_softmax(const Tensor& logits, double tau, const std::vector<double>& noise) {
  if (tau <= 0.0) throw ContractError("gumbel_softmax: temperature must be positive");
  if (noise.size() != logits.numel()) throw DimensionError("gumbel_softmax: noise size mismatch");
  const Tensor g(logits.shape(), noise);
  return numerics::softmax(numerics::scale(numerics::add(logits, g), 1.0 / tau), logits.rank() - 1);
}

Tensor straight_through(const Tensor& soft) {
  if (soft.rank() != 2) throw DimensionError("straight_through: expected [B, K]");
  const std::size_t b = soft.dim(0), k = soft.dim(1);
  const auto sv = soft.values();
  std::vector<double> hard(b * k, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (sv[i * k + j] > sv[i * k + best]) best = j;
    hard[i * k + best] = 1.0;
  }
  return Tensor::from_op({b, k}, std::move(hard), {soft},
                         [soft](std::span<const double>, std::span<const double> g) {
                           soft.accumulate_grad(g);
                         });
}

Tensor one_hot_mask(const std::vector<int>& choices, std::size_t classes) {
  std::vector<double> v(choices.size() * classes, 0.0);
  for (std::size_t i = 0; i < choices.size(); ++i) {
    v[i * classes + static_cast<std::size_t>(choices[i])] = 1.0;
  }
  return Tensor({choices.size(), classes}, std::move(v));
}

std::pair<Tensor, Tensor> route_mix(const Tensor& low, const Tensor& high, const Tensor& mask) {
  if (low.shape() != high.shape()) throw DimensionError("route_mix: sub-band shapes differ");
  const std::size_t b = low.dim(0);
  if (mask.rank() != 2 || mask.dim(0) != b || mask.dim(1) != 2) {
    throw DimensionError("route_mix: mask must be [B, 2]");
  }
  Shape bshape(low.rank(), 1);
  bshape[0] = b;
  const Tensor m0 = numerics::slice(mask, 1, 0, 1).reshape(bshape);
  const Tensor m1 = numerics::slice(mask, 1, 1, 1).reshape(bshape);
  Tensor primary = numerics::add(numerics::mul(low, m0), numerics::mul(high, m1));
  Tensor secondary = numerics::add(numerics::mul(low, m1), numerics::mul(high, m0));
  return {primary, secondary};
}

FrequencySelector::FrequencySelector(const std::string& name, std::size_t channels, numerics::Rng& rng)
    : squeeze(name + "/squeeze", 2 * channels, 2, rng) {}

namespace {

Tensor descriptor(const Tensor& x) {
  if (x.rank() == 3) return numerics::mean(x, 2);
  if (x.rank() == 4) return numerics::mean(numerics::mean(x, 3), 1);
  throw DimensionError("frequency selector: expected [B, C, L] or [B, N, C, L]");
}

}  // namespace

Tensor FrequencySelector::logits(const Tensor& low, const Tensor& high) const {
  return squeeze(numerics::concat({descriptor(low), descriptor(high)}, 1));
}

Selection FrequencySelector::select(const Tensor& low, const Tensor& high,
                                    const SelectorContext& ctx) const {
  const std::size_t b = low.dim(0);
  Selection out;
  Tensor mask;
  if (ctx.policy != RoutePolicy::kAdaptive) {
    const int band = ctx.policy == RoutePolicy::kForceLow ? kLow : kHigh;
    out.route.assign(b, band);
    mask = one_hot_mask(out.route);
    out.soft_mask = mask;
  } else {
    const Tensor lg = logits(low, high);
    Tensor soft;
    if (ctx.training) {
      if (!ctx.rng) throw ContractError("frequency selector: training requires an rng");
      soft = gumbel_softmax(lg, ctx.tau, sample_gumbel(lg.numel(), *ctx.rng));
      mask = straight_through(soft);
    } else {
      soft = numerics::softmax(numerics::scale(lg.detach(), 1.0 / ctx.tau), 1);
      mask = straight_through(soft).detach();
    }
    out.soft_mask = soft.detach();
    out.route.resize(b);
    for (std::size_t i = 0; i < b; ++i) out.route[i] = mask[i * 2] == 1.0 ? kLow : kHigh;
  }
  auto [primary, secondary] = route_mix(low, high, mask);
  out.primary = primary;
  out.secondary = secondary;
  return out;
}

void FrequencySelector::collect(numerics::ParameterList& out) { squeeze.collect(out); }

}  // namespace tsf::temporal_fusion
