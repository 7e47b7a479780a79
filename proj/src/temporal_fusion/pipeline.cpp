#include "tsf/temporal_fusion/pipeline.hpp"

#include "tsf/numerics/ops.hpp"

namespace tsf::temporal_fusion {

using numerics::DimensionError;

TemporalPipeline::TemporalPipeline(const std::string& name, const TemporalOptions& o,
                                   numerics::Rng& rng)
    : options(o) {
  selectors[0] = FrequencySelector(name + "/select0", o.in_channels, rng);
  local = LocalFusion(name + "/local", o.in_channels, o.channels, o.local_width, rng);
  selectors[1] = FrequencySelector(name + "/select1", o.channels, rng);
  graph = graph_fusion::ModalityNodeFusion(
      name + "/graph", {o.channels, o.channels, o.graph_layers, o.graph_mode}, rng);
  attention1 = SelfAttentionBlock(name + "/attention1", o.channels, o.heads, o.ff_hidden, rng);
  selectors[2] = FrequencySelector(name + "/select2", o.channels, rng);
  attention2 = SelfAttentionBlock(name + "/attention2", o.channels, o.heads, o.ff_hidden, rng);
}

std::array<std::size_t, 4> pipeline_lengths(std::size_t length, TemporalReduction reduction) {
  if (reduction == TemporalReduction::kNone) return {length, length, length, length};
  const std::size_t l1 = half_length(length);
  const std::size_t l2 = half_length(l1);
  return {l1, l2, l2, half_length(l2)};
}

TemporalOutput TemporalPipeline::forward(const Tensor& x, const TemporalContext& ctx) const {
  if (x.rank() != 4) throw DimensionError("temporal pipeline: expected [B, N, C, L]");
  if (x.dim(3) < kMinTemporalLength) {
    throw DimensionError("temporal pipeline: window length " + std::to_string(x.dim(3)) +
                         " is below the minimum of " + std::to_string(kMinTemporalLength));
  }
  const std::size_t b = x.dim(0);
  TemporalOutput out;
  const SelectorContext sctx{ctx.training, ctx.tau, ctx.rng, options.route_policy};
  if (options.reduction == TemporalReduction::kWavelet) out.routes.resize(b);

  // Returns (primary, secondary) for one reduction level.
  auto reduce = [&](const Tensor& in, std::size_t level) -> std::pair<Tensor, Tensor> {
    switch (options.reduction) {
      case TemporalReduction::kNone:
        return {in, Tensor()};
      case TemporalReduction::kPooling:
        return {avg_pool2(in), Tensor()};
      case TemporalReduction::kWavelet:
        break;
    }
    const DwtOutput bands = dwt_step(in);
    Selection s = selectors[level].select(bands.low, bands.high, sctx);
    for (std::size_t i = 0; i < b; ++i) out.routes[i][level] = s.route[i];
    out.soft_masks[level] = s.soft_mask;
    return {s.primary, s.secondary};
  };

  auto [p1, s1] = reduce(x, 0);
  const Tensor h1 = local.forward(p1, s1);

  auto [p2, s2] = reduce(h1, 1);
  graph_fusion::NodeFusionOutput g = graph.forward(p2);
  out.adjacency = g.adjacency;
  Tensor h2 = g.fused;
  if (s2.defined()) h2 = numerics::add(h2, numerics::mean(s2, 1));

  const Tensor h3 = global_fusion(h2, Tensor(), attention1, true);
  auto [p3, s3] = reduce(h3, 2);
  const Tensor h4 = global_fusion(p3, s3, attention2, false);

  out.lengths = {h1.dim(3), h2.dim(2), h3.dim(2), h4.dim(2)};
  out.pooled = numerics::mean(h4, 2);
  return out;
}

void TemporalPipeline::collect(numerics::ParameterList& out) {
  if (options.reduction == TemporalReduction::kWavelet &&
      options.route_policy == RoutePolicy::kAdaptive) {
    selectors[0].collect(out);
  }
  local.collect(out);
  if (options.reduction == TemporalReduction::kWavelet &&
      options.route_policy == RoutePolicy::kAdaptive) {
    selectors[1].collect(out);
  }
  graph.collect(out);
  attention1.collect(out);
  if (options.reduction == TemporalReduction::kWavelet &&
      options.route_policy == RoutePolicy::kAdaptive) {
    selectors[2].collect(out);
  }
  attention2.collect(out);
}

}  // namespace tsf::temporal_fusion
