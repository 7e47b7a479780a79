#include "tsf/model_train/model.hpp"

#include "tsf/numerics/ops.hpp"

namespace tsf::model_train {

using numerics::DimensionError;
using numerics::Padding;

namespace {
constexpr double kClassifierInitScale = 0.1;
}

Tensor stack_windows(const std::vector<datapipe::SensorWindow>& windows,
                     const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DimensionError("stack_windows: empty batch");
  const datapipe::SensorWindow& first = windows.at(indices[0]);
  const std::size_t per = first.data.size();
  std::vector<double> v;
  v.reserve(indices.size() * per);
  for (std::size_t i : indices) {
    const datapipe::SensorWindow& w = windows.at(i);
    if (w.imu_count != first.imu_count || w.length != first.length) {
      throw DimensionError("stack_windows: windows differ in IMU count or length");
    }
    v.insert(v.end(), w.data.begin(), w.data.end());
  }
  return Tensor({indices.size(), first.imu_count, datapipe::kSensorKinds * 3, first.length}, std::move(v));
}

Tensor stack_windows(const std::vector<datapipe::SensorWindow>& windows) {
  std::vector<std::size_t> idx(windows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return stack_windows(windows, idx);
}

TsfModel::TsfModel(const TsfConfig& config) : config_(config) {
  config_.validate();
  if (config_.classes < 2) throw ConfigError("model: at least 2 classes are required");
  if (config_.imu_count < 1) throw ConfigError("model: imu_count must be positive");
  numerics::Rng rng(config_.seed);
  const std::size_t c = config_.cconv_channels;
  if (config_.imu_fusion) {
    imu_ = imu_fusion::ImuFusionBlock(
        "imu", {c, config_.grav_width, config_.gyro_width, config_.lacc_width, config_.sensor_attention}, rng);
  } else {
    plain_posture_ = numerics::Conv1d("plain/posture", 6, c, config_.grav_width, Padding::kSame, rng);
    plain_motion_ = numerics::Conv1d("plain/motion", 3, c, config_.lacc_width, Padding::kSame, rng);
  }
  posture_proj_ = numerics::Conv1d("proj/posture", c, config_.projection_channels, 1, Padding::kSame, rng);
  motion_proj_ = numerics::Conv1d("proj/motion", c, config_.projection_channels, 1, Padding::kSame, rng);
  temporal_fusion::TemporalOptions t;
  t.in_channels = config_.projection_channels;
  t.channels = config_.temporal_channels;
  t.local_width = config_.local_width;
  t.heads = config_.attention_heads;
  t.ff_hidden = config_.ff_hidden;
  t.graph_layers = config_.graph_layers;
  t.graph_mode = config_.graph_mode;
  t.reduction = config_.temporal_reduction;
  t.route_policy = config_.route_policy;
  temporal_ = temporal_fusion::TemporalPipeline("temporal", t, rng);
  head_norm_ = numerics::LayerNorm("head_norm", config_.temporal_channels);
  classifier_ = numerics::Linear("classifier", config_.temporal_channels, config_.classes, rng);
  for (double& w : classifier_.weight.tensor.values_mut()) w *= kClassifierInitScale;
}

ForwardResult TsfModel::forward(const Tensor& input, const ForwardContext& ctx) const {
  if (input.rank() != 4 || input.dim(2) != datapipe::kSensorKinds * 3) {
    throw DimensionError("model: expected input [B, P, 9, L], got " + numerics::shape_str(input.shape()));
  }
  const std::size_t b = input.dim(0), p = input.dim(1), len = input.dim(3);
  if (p != config_.imu_count) {
    throw DimensionError("model: configured for " + std::to_string(config_.imu_count) +
                         " IMUs, input has " + std::to_string(p));
  }
  if (len < temporal_fusion::kMinTemporalLength) {
    throw DimensionError("model: window length " + std::to_string(len) + " is below 8");
  }
  ForwardResult out;
  const Tensor flat = input.reshape({b * p, 9, len});
  const Tensor grav = numerics::slice(flat, 1, 0, 3);
  const Tensor gyro = numerics::slice(flat, 1, 3, 3);
  const Tensor lacc = numerics::slice(flat, 1, 6, 3);
  Tensor posture, motion;
  if (config_.imu_fusion) {
    imu_fusion::ImuFusionOutput f = imu_.forward(grav, gyro, lacc);
    posture = f.posture;
    motion = f.motion;
    out.attention = f.attention.detach().reshape({b, p, 2, len});
  } else {
    posture = plain_posture_(numerics::slice(flat, 1, 0, 6));
    motion = plain_motion_(lacc);
    out.attention = Tensor::full({b, p, 2, len}, 0.5);
  }
  const std::size_t cp = config_.projection_channels;
  const Tensor pn = posture_proj_(posture).reshape({b, p, 1, cp, len});
  const Tensor mn = motion_proj_(motion).reshape({b, p, 1, cp, len});
  const Tensor nodes = numerics::concat({pn, mn}, 2).reshape({b, 2 * p, cp, len});

  const temporal_fusion::TemporalContext tctx{ctx.mode == Mode::kTrain, ctx.tau, ctx.rng};
  temporal_fusion::TemporalOutput t = temporal_.forward(nodes, tctx);
  out.logits = classifier_(head_norm_(t.pooled));
  out.routes = std::move(t.routes);
  out.adjacency = t.adjacency;
  out.lengths = t.lengths;
  return out;
}

numerics::ParameterList TsfModel::parameters() {
  numerics::ParameterList ps;
  if (config_.imu_fusion) {
    imu_.collect(ps);
  } else {
    plain_posture_.collect(ps);
    plain_motion_.collect(ps);
  }
  posture_proj_.collect(ps);
  motion_proj_.collect(ps);
  temporal_.collect(ps);
  head_norm_.collect(ps);
  classifier_.collect(ps);
  return ps;
}

}  // namespace tsf::model_train
