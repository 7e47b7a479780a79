#pragma once

#include <array>
#include <string>
#include <vector>

#include "tsf/datapipe/types.hpp"
#include "tsf/imu_fusion/block.hpp"
#include "tsf/model_train/config.hpp"
#include "tsf/temporal_fusion/pipeline.hpp"

namespace tsf::model_train {

using numerics::Tensor;

enum class Mode { kTrain, kInfer };

struct ForwardContext {
  Mode mode = Mode::kInfer;
  double tau = 1.0;
  numerics::Rng* rng = nullptr;
};

struct ForwardResult {
  Tensor logits;     // [B, classes]
  Tensor attention;  // [B, P, 2, L] values: grav, gyro
  std::vector<std::array<int, temporal_fusion::kSelectionLevels>> routes;
  Tensor adjacency;  // [B, L', 2P, 2P] values
  std::array<std::size_t, 4> lengths{};
};

/// Stacks windows [P][K][3][L] into a constant [B, P, K * 3, L] tensor.
Tensor stack_windows(const std::vector<datapipe::SensorWindow>& windows,
                     const std::vector<std::size_t>& indices);
Tensor stack_windows(const std::vector<datapipe::SensorWindow>& windows);

/// IMU fusion per position (weights shared across positions), per-node 1x1
/// projection, temporal pipeline, layer norm and a linear classifier. Nodes are
/// ordered (posture_0, motion_0, posture_1, motion_1, ...).
/// The classifier weights start at a tenth of the He scale so initial logits are near uniform.
class TsfModel {
 public:
  TsfModel() = default;
  /// `config.classes` and `config.imu_count` must be set.
  explicit TsfModel(const TsfConfig& config);

  ForwardResult forward(const Tensor& input, const ForwardContext& ctx = {}) const;
  numerics::ParameterList parameters();

  const TsfConfig& config() const { return config_; }

 private:
  TsfConfig config_;
  imu_fusion::ImuFusionBlock imu_;
  numerics::Conv1d plain_posture_;
  numerics::Conv1d plain_motion_;
  numerics::Conv1d posture_proj_;
  numerics::Conv1d motion_proj_;
  temporal_fusion::TemporalPipeline temporal_;
  numerics::LayerNorm head_norm_;
  numerics::Linear classifier_;
};

}  // namespace tsf::model_train
