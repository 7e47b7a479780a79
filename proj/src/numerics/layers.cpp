#include "tsf/numerics/layers.hpp"

#include <cmath>

#include "tsf/numerics/ops.hpp"

namespace tsf::numerics {

Parameter::Parameter(std::string n, Tensor values)
    : name(std::move(n)),
      tensor(values.shape(), std::vector<double>(values.values().begin(), values.values().end()),
             true),
      m(tensor.numel(), 0.0),
      v(tensor.numel(), 0.0) {}

Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw DimensionError("he_normal: fan_in must be positive");
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  std::vector<double> values(shape_numel(shape));
  for (double& x : values) x = dist(rng);
  return Tensor(std::move(shape), std::move(values));
}

Linear::Linear(const std::string& name, std::size_t d_in, std::size_t d_out, Rng& rng,
               bool with_bias)
    : weight(name + "/weight", he_normal({d_out, d_in}, d_in, rng)) {
  if (with_bias) bias = Parameter(name + "/bias", Tensor::zeros({d_out}));
}

Tensor Linear::operator()(const Tensor& x) const { return linear(x, weight.tensor, bias.tensor); }

void Linear::collect(ParameterList& out) {
  out.push_back(&weight);
  if (bias.tensor.defined()) out.push_back(&bias);
}

Conv1d::Conv1d(const std::string& name, std::size_t c_in, std::size_t c_out, std::size_t width,
               Padding pad, Rng& rng, bool with_bias)
    : weight(name + "/weight", he_normal({c_out, c_in, width}, c_in * width, rng)), padding(pad) {
  if (with_bias) bias = Parameter(name + "/bias", Tensor::zeros({c_out}));
}

Tensor Conv1d::operator()(const Tensor& x) const {
  return padding == Padding::kCausal ? causal_conv1d(x, weight.tensor, bias.tensor)
                                     : same_conv1d(x, weight.tensor, bias.tensor);
}

void Conv1d::collect(ParameterList& out) {
  out.push_back(&weight);
  if (bias.tensor.defined()) out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, std::size_t features)
    : gain(name + "/gain", Tensor::full({features}, 1.0)),
      shift(name + "/shift", Tensor::zeros({features})) {}

Tensor LayerNorm::operator()(const Tensor& x) const {
  return layer_norm(x, gain.tensor, shift.tensor);
}

void LayerNorm::collect(ParameterList& out) {
  out.push_back(&gain);
  out.push_back(&shift);
}

void adam_step(const ParameterList& params, double lr, const AdamOptions& o) {
  for (Parameter* p : params) {
    if (!p->tensor.has_grad()) continue;
    const auto g = p->tensor.grad();
    auto w = p->tensor.values_mut();
    ++p->step;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(p->step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(p->step));
    for (std::size_t i = 0; i < w.size(); ++i) {
      p->m[i] = o.beta1 * p->m[i] + (1.0 - o.beta1) * g[i];
      p->v[i] = o.beta2 * p->v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = p->m[i] / c1;
      const double v_hat = p->v[i] / c2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

void zero_grad(const ParameterList& params) {
  for (Parameter* p : params) p->tensor.zero_grad();
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->tensor.numel();
  return n;
}

}  // namespace tsf::numerics
