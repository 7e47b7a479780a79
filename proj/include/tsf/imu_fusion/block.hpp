#pragma once

#include <string>

#include "tsf/numerics/layers.hpp"

namespace tsf::imu_fusion {

struct ImuFusionOptions {
  std::size_t channels = 64;
  std::size_t grav_width = 11;
  std::size_t gyro_width = 10;
  std::size_t lacc_width = 11;
  /// Softmax attention over the two posture sensors; when false the branches are summed.
  bool sensor_attention = true;
};

struct ImuFusionOutput {
  numerics::Tensor posture;  // [B, C, L]
  numerics::Tensor motion;   // [B, C, L]
  numerics::Tensor attention;  // [B, 2, L]: grav, gyro
};

/// Posture branch: causal convolutions over gravity and gyroscope, fused by a
/// per-timestamp softmax over tanh(W0 v + b0). Motion branch: causal convolution
/// over linear acceleration.
class ImuFusionBlock {
 public:
  ImuFusionBlock() = default;
  ImuFusionBlock(const std::string& name, const ImuFusionOptions& options, numerics::Rng& rng);

  /// Inputs are [B, 3, L].
  ImuFusionOutput forward(const numerics::Tensor& grav, const numerics::Tensor& gyro,
                          const numerics::Tensor& lacc) const;
  void collect(numerics::ParameterList& out);

  ImuFusionOptions options;
  numerics::Conv1d cconv_grav;
  numerics::Conv1d cconv_gyro;
  numerics::Conv1d cconv_lacc;
  numerics::Linear attn_proj;
};

}  // namespace tsf::imu_fusion
