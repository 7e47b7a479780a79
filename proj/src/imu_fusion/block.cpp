#include "tsf/imu_fusion/block.hpp"

#include "tsf/numerics/ops.hpp"

namespace tsf::imu_fusion {

using numerics::Tensor;

ImuFusionBlock::ImuFusionBlock(const std::string& name, const ImuFusionOptions& o,
                               numerics::Rng& rng)
    : options(o),
      cconv_grav(name + "/cconv_grav", 3, o.channels, o.grav_width, numerics::Padding::kCausal, rng),
      cconv_gyro(name + "/cconv_gyro", 3, o.channels, o.gyro_width, numerics::Padding::kCausal, rng),
      cconv_lacc(name + "/cconv_lacc", 3, o.channels, o.lacc_width, numerics::Padding::kCausal, rng),
      attn_proj(name + "/attn_proj", o.channels, 1, rng) {}

ImuFusionOutput ImuFusionBlock::forward(const Tensor& grav, const Tensor& gyro,
                                        const Tensor& lacc) const {
  if (grav.rank() != 3 || grav.shape() != gyro.shape() || grav.shape() != lacc.shape()) {
    throw numerics::DimensionError("imu fusion: grav, gyro and lacc must share shape [B, 3, L]");
  }
  ImuFusionOutput out;
  const Tensor v_grav = cconv_grav(grav);
  const Tensor v_gyro = cconv_gyro(gyro);
  out.motion = cconv_lacc(lacc);
  const std::size_t b = grav.dim(0), len = grav.dim(2);
  if (!options.sensor_attention) {
    out.posture = numerics::add(v_grav, v_gyro);
    out.attention = Tensor::full({b, 2, len}, 0.5);
    return out;
  }
  // W0 applied per timestamp as a width-1 convolution over channels.
  const Tensor w0 = attn_proj.weight.tensor.reshape({1, options.channels, 1});
  const Tensor mu_grav = numerics::tanh(numerics::conv1d(v_grav, w0, attn_proj.bias.tensor, 0, 0));
  const Tensor mu_gyro = numerics::tanh(numerics::conv1d(v_gyro, w0, attn_proj.bias.tensor, 0, 0));
  const Tensor attn = numerics::softmax(numerics::concat({mu_grav, mu_gyro}, 1), 1);
  out.posture = numerics::add(numerics::mul(v_grav, numerics::slice(attn, 1, 0, 1)),
                              numerics::mul(v_gyro, numerics::slice(attn, 1, 1, 1)));
  out.attention = attn;
  return out;
}

void ImuFusionBlock::collect(numerics::ParameterList& out) {
  cconv_grav.collect(out);
  cconv_gyro.collect(out);
  cconv_lacc.collect(out);
  attn_proj.collect(out);
}

}  // namespace tsf::imu_fusion
