#pragma once

#include <array>
#include <string>
#include <vector>

#include "tsf/graph_fusion/graph.hpp"
#include "tsf/temporal_fusion/fusion.hpp"
#include "tsf/temporal_fusion/selector.hpp"
#include "tsf/temporal_fusion/wavelet.hpp"

namespace tsf::temporal_fusion {

inline constexpr std::size_t kSelectionLevels = 3;
inline constexpr std::size_t kMinTemporalLength = 8;

enum class TemporalReduction { kWavelet, kNone, kPooling };

struct TemporalOptions {
  std::size_t in_channels = 96;
  std::size_t channels = 128;
  std::size_t local_width = 5;
  std::size_t heads = 4;
  std::size_t ff_hidden = 256;
  std::size_t graph_layers = 2;
  graph_fusion::GraphMode graph_mode = graph_fusion::GraphMode::kDynamic;
  TemporalReduction reduction = TemporalReduction::kWavelet;
  RoutePolicy route_policy = RoutePolicy::kAdaptive;
};

struct TemporalContext {
  bool training = false;
  double tau = 1.0;
  numerics::Rng* rng = nullptr;
};

struct TemporalOutput {
  Tensor pooled;  // [B, C]
  /// Sub-band per sample and level; empty when the wavelet reduction is off.
  std::vector<std::array<int, kSelectionLevels>> routes;
  /// Lengths at local fusion, graph fusion, attention 1 and attention 2.
  std::array<std::size_t, 4> lengths{};
  Tensor adjacency;  // [B, L2, N, N] values
  std::array<Tensor, kSelectionLevels> soft_masks;
};

/// Selection, local fusion, selection, graph fusion, attention, selection,
/// attention, then the mean over time. The secondary band of each selection is
/// added back after the following fusion layer.
class TemporalPipeline {
 public:
  TemporalPipeline() = default;
  TemporalPipeline(const std::string& name, const TemporalOptions& options, numerics::Rng& rng);

  /// features [B, N, C_in, L] with L >= 8.
  TemporalOutput forward(const Tensor& features, const TemporalContext& ctx) const;
  void collect(numerics::ParameterList& out);

  TemporalOptions options;
  std::array<FrequencySelector, kSelectionLevels> selectors;
  LocalFusion local;
  graph_fusion::ModalityNodeFusion graph;
  SelfAttentionBlock attention1;
  SelfAttentionBlock attention2;
};

/// Internal lengths {local, graph, attention 1, attention 2} for an input length.
std::array<std::size_t, 4> pipeline_lengths(std::size_t length, TemporalReduction reduction);

}  // namespace tsf::temporal_fusion
