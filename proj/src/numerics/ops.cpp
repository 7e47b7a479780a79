#include "tsf/numerics/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "tsf/numerics/flops.hpp"

namespace tsf::numerics {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

std::vector<std::size_t> row_major_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
  BroadcastPlan plan;
  plan.out.resize(rank);
  const auto sa = row_major_strides(pa);
  const auto sb = row_major_strides(pb);
  plan.stride_a.resize(rank);
  plan.stride_b.resize(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    if (pa[d] != pb[d] && pa[d] != 1 && pb[d] != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                           shape_str(b));
    }
    plan.out[d] = std::max(pa[d], pb[d]);
    plan.stride_a[d] = pa[d] == 1 ? 0 : sa[d];
    plan.stride_b[d] = pb[d] == 1 ? 0 : sb[d];
  }
  return plan;
}

// Calls f(out_index, a_index, b_index) over every output element in row-major order.
template <class F>
void for_each_broadcast(const BroadcastPlan& plan, F&& f) {
  const Shape& out = plan.out;
  const std::size_t rank = out.size();
  const std::size_t n = shape_numel(out);
  if (n == 0) return;
  if (rank == 0) {
    f(0, 0, 0);
    return;
  }
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  const std::size_t inner = out[rank - 1];
  const std::size_t step_a = plan.stride_a[rank - 1];
  const std::size_t step_b = plan.stride_b[rank - 1];
  for (std::size_t o = 0; o < n; o += inner) {
    std::size_t a = ia, b = ib;
    for (std::size_t t = 0; t < inner; ++t, a += step_a, b += step_b) f(o + t, a, b);
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++idx[d];
      ia += plan.stride_a[d];
      ib += plan.stride_b[d];
      if (idx[d] < out[d]) break;
      ia -= plan.stride_a[d] * out[d];
      ib -= plan.stride_b[d] * out[d];
      idx[d] = 0;
    }
  }
}

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
  const auto va = a.values();
  const auto vb = b.values();
  if (a.shape() == b.shape()) {
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      switch (kind) {
        case BinaryKind::kAdd: out[i] = va[i] + vb[i]; break;
        case BinaryKind::kSub: out[i] = va[i] - vb[i]; break;
        case BinaryKind::kMul: out[i] = va[i] * vb[i]; break;
      }
    }
    return Tensor::from_op(a.shape(), std::move(out), {a, b},
                           [a, b, kind](std::span<const double>, std::span<const double> g) {
                             if (a.requires_grad()) {
                               auto ga = a.grad_mut();
                               if (kind == BinaryKind::kMul) {
                                 auto vb = b.values();
                                 for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
                               } else {
                                 for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                               }
                             }
                             if (b.requires_grad()) {
                               auto gb = b.grad_mut();
                               if (kind == BinaryKind::kMul) {
                                 auto va = a.values();
                                 for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
                               } else if (kind == BinaryKind::kSub) {
                                 for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                               } else {
                                 for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                               }
                             }
                           });
  }
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a.shape(), b.shape(), name));
  std::vector<double> out(shape_numel(plan->out));
  for_each_broadcast(*plan, [&](std::size_t o, std::size_t i, std::size_t j) {
    switch (kind) {
      case BinaryKind::kAdd: out[o] = va[i] + vb[j]; break;
      case BinaryKind::kSub: out[o] = va[i] - vb[j]; break;
      case BinaryKind::kMul: out[o] = va[i] * vb[j]; break;
    }
  });
  return Tensor::from_op(
      plan->out, std::move(out), {a, b},
      [a, b, kind, plan](std::span<const double>, std::span<const double> g) {
        const auto va = a.values();
        const auto vb = b.values();
        if (a.requires_grad()) {
          auto ga = a.grad_mut();
          for_each_broadcast(*plan, [&](std::size_t o, std::size_t i, std::size_t j) {
            ga[i] += kind == BinaryKind::kMul ? g[o] * vb[j] : g[o];
          });
        }
        if (b.requires_grad()) {
          auto gb = b.grad_mut();
          for_each_broadcast(*plan, [&](std::size_t o, std::size_t i, std::size_t j) {
            switch (kind) {
              case BinaryKind::kAdd: gb[j] += g[o]; break;
              case BinaryKind::kSub: gb[j] -= g[o]; break;
              case BinaryKind::kMul: gb[j] += g[o] * va[i]; break;
            }
          });
        }
      });
}

// Splits a shape around `axis` into (outer, axis length, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(s));
  }
  AxisSplit r;
  for (std::size_t d = 0; d < axis; ++d) r.outer *= s[d];
  r.extent = s[axis];
  for (std::size_t d = axis + 1; d < s.size(); ++d) r.inner *= s[d];
  return r;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kMul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  const auto v = a.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * factor;
  return Tensor::from_op(a.shape(), std::move(out), {a},
                         [a, factor](std::span<const double>, std::span<const double> g) {
                           auto ga = a.grad_mut();
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
                         });
}

Tensor tanh(const Tensor& x) {
  const auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return Tensor::from_op(x.shape(), std::move(out), {x},
                         [x](std::span<const double> y, std::span<const double> g) {
                           auto gx = x.grad_mut();
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
                         });
}

Tensor relu(const Tensor& x) {
  const auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return Tensor::from_op(x.shape(), std::move(out), {x},
                         [x](std::span<const double>, std::span<const double> g) {
                           auto gx = x.grad_mut();
                           const auto v = x.values();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (v[i] > 0.0) gx[i] += g[i];
                           }
                         });
}

Tensor exp(const Tensor& x) {
  const auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i]);
  return Tensor::from_op(x.shape(), std::move(out), {x},
                         [x](std::span<const double> y, std::span<const double> g) {
                           auto gx = x.grad_mut();
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
                         });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::from_op(Shape{}, {s}, {x},
                         [x](std::span<const double>, std::span<const double> g) {
                           auto gx = x.grad_mut();
                           for (double& v : gx) v += g[0];
                         });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const AxisSplit sp = split_axis(x.shape(), axis, "mean");
  if (sp.extent == 0) throw DimensionError("mean: empty axis");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const auto v = x.values();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  const double inv = 1.0 / static_cast<double>(sp.extent);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t a = 0; a < sp.extent; ++a) {
      const double* src = v.data() + (o * sp.extent + a) * sp.inner;
      double* dst = out.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
    for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] *= inv;
  }
  return Tensor::from_op(std::move(out_shape), std::move(out), {x},
                         [x, sp, inv](std::span<const double>, std::span<const double> g) {
                           auto gx = x.grad_mut();
                           for (std::size_t o = 0; o < sp.outer; ++o) {
                             for (std::size_t a = 0; a < sp.extent; ++a) {
                               double* dst = gx.data() + (o * sp.extent + a) * sp.inner;
                               const double* src = g.data() + o * sp.inner;
                               for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i] * inv;
                             }
                           }
                         });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit sp = split_axis(x.shape(), axis, "softmax");
  if (sp.extent == 0) throw DimensionError("softmax: empty axis");
  const auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.extent * sp.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < sp.extent; ++a) mx = std::max(mx, v[base + a * sp.inner]);
      double z = 0.0;
      for (std::size_t a = 0; a < sp.extent; ++a) {
        const double e = std::exp(v[base + a * sp.inner] - mx);
        out[base + a * sp.inner] = e;
        z += e;
      }
      for (std::size_t a = 0; a < sp.extent; ++a) out[base + a * sp.inner] /= z;
    }
  }
  return Tensor::from_op(x.shape(), std::move(out), {x},
                         [x, sp](std::span<const double> y, std::span<const double> g) {
                           auto gx = x.grad_mut();
                           for (std::size_t o = 0; o < sp.outer; ++o) {
                             for (std::size_t i = 0; i < sp.inner; ++i) {
                               const std::size_t base = o * sp.extent * sp.inner + i;
                               double dot = 0.0;
                               for (std::size_t a = 0; a < sp.extent; ++a) {
                                 const std::size_t k = base + a * sp.inner;
                                 dot += g[k] * y[k];
                               }
                               for (std::size_t a = 0; a < sp.extent; ++a) {
                                 const std::size_t k = base + a * sp.inner;
                                 gx[k] += y[k] * (g[k] - dot);
                               }
                             }
                           }
                         });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (d == 0) throw DimensionError("layer_norm: empty feature axis");
  if (gain.numel() != d || shift.numel() != d) {
    throw DimensionError("layer_norm: gain/shift must have " + std::to_string(d) + " entries");
  }
  const std::size_t rows = x.numel() / d;
  const auto v = x.values();
  const auto gv = gain.values();
  const auto sv = shift.values();
  std::vector<double> xhat(v.size());
  std::vector<double> inv_std(rows);
  std::vector<double> out(v.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + sv[j];
    }
  }
  return Tensor::from_op(
      x.shape(), std::move(out), {x, gain, shift},
      [x, gain, shift, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          std::span<const double>, std::span<const double> g) {
        const auto gv = gain.values();
        if (gain.requires_grad() || shift.requires_grad()) {
          std::vector<double> dg(d, 0.0), ds(d, 0.0);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < d; ++j) {
              dg[j] += g[r * d + j] * xhat[r * d + j];
              ds[j] += g[r * d + j];
            }
          }
          if (gain.requires_grad()) gain.accumulate_grad(dg);
          if (shift.requires_grad()) shift.accumulate_grad(ds);
        }
        if (x.requires_grad()) {
          auto gx = x.grad_mut();
          const double invd = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gv[j];
              m1 += dh;
              m2 += dh * xhat[r * d + j];
            }
            m1 *= invd;
            m2 *= invd;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gv[j];
              gx[r * d + j] += inv_std[r] * (dh - m1 - xhat[r * d + j] * m2);
            }
          }
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() == 0) throw DimensionError("linear: scalar input");
  if (weight.rank() != 2) throw DimensionError("linear: weight must be [D_out, D_in]");
  const std::size_t d_in = weight.dim(1);
  const std::size_t d_out = weight.dim(0);
  if (x.shape().back() != d_in) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  if (bias.defined() && bias.numel() != d_out) throw DimensionError("linear: bias size mismatch");
  const std::size_t rows = x.numel() / d_in;
  Shape out_shape = x.shape();
  out_shape.back() = d_out;
  std::vector<double> out(rows * d_out);
  ConstMapMat X(x.values().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_in));
  ConstMapMat W(weight.values().data(), static_cast<Eigen::Index>(d_out),
                static_cast<Eigen::Index>(d_in));
  MapMat Y(out.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_out));
  Y.noalias() = X * W.transpose();
  if (bias.defined()) {
    const auto bv = bias.values();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < d_out; ++j) out[r * d_out + j] += bv[j];
    }
  }
  FlopCounter::record(2.0 * static_cast<double>(rows * d_in * d_out) +
                      (bias.defined() ? static_cast<double>(rows * d_out) : 0.0));
  return Tensor::from_op(
      std::move(out_shape), std::move(out), {x, weight, bias},
      [x, weight, bias, rows, d_in, d_out](std::span<const double>, std::span<const double> g) {
        const auto R = static_cast<Eigen::Index>(rows);
        const auto I = static_cast<Eigen::Index>(d_in);
        const auto O = static_cast<Eigen::Index>(d_out);
        ConstMapMat G(g.data(), R, O);
        if (x.requires_grad()) {
          MapMat GX(x.grad_mut().data(), R, I);
          ConstMapMat W(weight.values().data(), O, I);
          GX.noalias() += G * W;
        }
        if (weight.requires_grad()) {
          MapMat GW(weight.grad_mut().data(), O, I);
          ConstMapMat X(x.values().data(), R, I);
          GW.noalias() += G.transpose() * X;
        }
        if (bias.defined() && bias.requires_grad()) {
          auto gb = bias.grad_mut();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < d_out; ++j) gb[j] += g[r * d_out + j];
          }
        }
      });
}

namespace {

// col[(c * W + k) * L_out + t] = x[c, t + k - pad_left] (zero outside the signal).
void im2col(const double* x, std::size_t c_in, std::size_t len, std::size_t width,
            std::size_t pad_left, std::size_t l_out, double* col) {
  for (std::size_t c = 0; c < c_in; ++c) {
    const double* xc = x + c * len;
    for (std::size_t k = 0; k < width; ++k) {
      double* dst = col + (c * width + k) * l_out;
      for (std::size_t t = 0; t < l_out; ++t) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                   static_cast<std::ptrdiff_t>(pad_left);
        dst[t] = (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) ? xc[src] : 0.0;
      }
    }
  }
}

void col2im_add(const double* col, std::size_t c_in, std::size_t len, std::size_t width,
                std::size_t pad_left, std::size_t l_out, double* gx) {
  for (std::size_t c = 0; c < c_in; ++c) {
    double* gc = gx + c * len;
    for (std::size_t k = 0; k < width; ++k) {
      const double* src = col + (c * width + k) * l_out;
      for (std::size_t t = 0; t < l_out; ++t) {
        const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(t + k) -
                                   static_cast<std::ptrdiff_t>(pad_left);
        if (dst >= 0 && dst < static_cast<std::ptrdiff_t>(len)) gc[dst] += src[t];
      }
    }
  }
}

}  // namespace

Tensor conv1d(const Tensor& x_in, const Tensor& weight, const Tensor& bias, std::size_t pad_left,
              std::size_t pad_right) {
  const bool unbatched = x_in.rank() == 2;
  if (!unbatched && x_in.rank() != 3) throw DimensionError("conv1d: input must be [B, C, L]");
  const Tensor x = unbatched ? x_in.reshape({1, x_in.dim(0), x_in.dim(1)}) : x_in;
  if (weight.rank() != 3) throw DimensionError("conv1d: kernel must be [C_out, C_in, W]");
  const std::size_t batch = x.dim(0), c_in = x.dim(1), len = x.dim(2);
  const std::size_t c_out = weight.dim(0), width = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw DimensionError("conv1d: kernel expects " + std::to_string(weight.dim(1)) +
                         " input channels, input has " + std::to_string(c_in));
  }
  if (width < 1) throw DimensionError("conv1d: kernel width must be >= 1");
  if (len < 1) throw DimensionError("conv1d: empty input");
  if (bias.defined() && bias.numel() != c_out) throw DimensionError("conv1d: bias size mismatch");
  if (len + pad_left + pad_right < width) throw DimensionError("conv1d: input shorter than kernel");
  const std::size_t l_out = len + pad_left + pad_right - width + 1;
  const bool direct = width == 1 && pad_left == 0 && pad_right == 0;
  const auto CO = static_cast<Eigen::Index>(c_out);
  const auto CK = static_cast<Eigen::Index>(c_in * width);
  const auto LO = static_cast<Eigen::Index>(l_out);

  std::vector<double> out(batch * c_out * l_out);
  std::vector<double> col(direct ? 0 : c_in * width * l_out);
  ConstMapMat Wm(weight.values().data(), CO, CK);
  const auto xv = x.values();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = xv.data() + b * c_in * len;
    if (!direct) im2col(xb, c_in, len, width, pad_left, l_out, col.data());
    ConstMapMat C(direct ? xb : col.data(), CK, LO);
    MapMat Y(out.data() + b * c_out * l_out, CO, LO);
    Y.noalias() = Wm * C;
    if (bias.defined()) {
      const auto bv = bias.values();
      for (std::size_t o = 0; o < c_out; ++o) {
        double* row = out.data() + (b * c_out + o) * l_out;
        for (std::size_t t = 0; t < l_out; ++t) row[t] += bv[o];
      }
    }
  }
  FlopCounter::record(static_cast<double>(batch * l_out) *
                      (2.0 * static_cast<double>(c_out * c_in * width) +
                       (bias.defined() ? static_cast<double>(c_out) : 0.0)));

  Tensor result = Tensor::from_op(
      {batch, c_out, l_out}, std::move(out), {x, weight, bias},
      [x, weight, bias, batch, c_in, len, c_out, width, pad_left, l_out, direct](
          std::span<const double>, std::span<const double> g) {
        const auto CO = static_cast<Eigen::Index>(c_out);
        const auto CK = static_cast<Eigen::Index>(c_in * width);
        const auto LO = static_cast<Eigen::Index>(l_out);
        std::vector<double> col(direct ? 0 : c_in * width * l_out);
        std::vector<double> dcol(direct ? 0 : c_in * width * l_out);
        ConstMapMat Wm(weight.values().data(), CO, CK);
        const auto xv = x.values();
        for (std::size_t b = 0; b < batch; ++b) {
          ConstMapMat G(g.data() + b * c_out * l_out, CO, LO);
          const double* xb = xv.data() + b * c_in * len;
          if (weight.requires_grad()) {
            if (!direct) im2col(xb, c_in, len, width, pad_left, l_out, col.data());
            ConstMapMat C(direct ? xb : col.data(), CK, LO);
            MapMat GW(weight.grad_mut().data(), CO, CK);
            GW.noalias() += G * C.transpose();
          }
          if (x.requires_grad()) {
            double* gxb = x.grad_mut().data() + b * c_in * len;
            if (direct) {
              MapMat GX(gxb, CK, LO);
              GX.noalias() += Wm.transpose() * G;
            } else {
              MapMat DC(dcol.data(), CK, LO);
              DC.noalias() = Wm.transpose() * G;
              col2im_add(dcol.data(), c_in, len, width, pad_left, l_out, gxb);
            }
          }
        }
        if (bias.defined() && bias.requires_grad()) {
          auto gb = bias.grad_mut();
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < c_out; ++o) {
              const double* row = g.data() + (b * c_out + o) * l_out;
              double s = 0.0;
              for (std::size_t t = 0; t < l_out; ++t) s += row[t];
              gb[o] += s;
            }
          }
        }
      });
  return unbatched ? result.reshape({c_out, l_out}) : result;
}

Tensor causal_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 3 || weight.dim(2) < 1) {
    throw DimensionError("causal_conv1d: kernel must be [C_out, C_in, W] with W >= 1");
  }
  return conv1d(x, weight, bias, weight.dim(2) - 1, 0);
}

Tensor same_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 3 || weight.dim(2) < 1) {
    throw DimensionError("same_conv1d: kernel must be [C_out, C_in, W] with W >= 1");
  }
  const std::size_t w = weight.dim(2);
  const std::size_t left = (w - 1) / 2;
  return conv1d(x, weight, bias, left, w - 1 - left);
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t groups = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  const auto M = static_cast<Eigen::Index>(m);
  const auto K = static_cast<Eigen::Index>(k);
  const auto N = static_cast<Eigen::Index>(n);
  std::vector<double> out(groups * m * n);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t gi = 0; gi < groups; ++gi) {
    MapMat C(out.data() + gi * m * n, M, N);
    C.noalias() = ConstMapMat(av.data() + gi * m * k, M, K) * ConstMapMat(bv.data() + gi * k * n, K, N);
  }
  FlopCounter::record(2.0 * static_cast<double>(groups * m * k * n));
  return Tensor::from_op(
      {groups, m, n}, std::move(out), {a, b},
      [a, b, groups, m, k, n](std::span<const double>, std::span<const double> g) {
        const auto M = static_cast<Eigen::Index>(m);
        const auto K = static_cast<Eigen::Index>(k);
        const auto N = static_cast<Eigen::Index>(n);
        const auto av = a.values();
        const auto bv = b.values();
        for (std::size_t gi = 0; gi < groups; ++gi) {
          ConstMapMat G(g.data() + gi * m * n, M, N);
          if (a.requires_grad()) {
            MapMat GA(a.grad_mut().data() + gi * m * k, M, K);
            GA.noalias() += G * ConstMapMat(bv.data() + gi * k * n, K, N).transpose();
          }
          if (b.requires_grad()) {
            MapMat GB(b.grad_mut().data() + gi * k * n, K, N);
            GB.noalias() += ConstMapMat(av.data() + gi * m * k, M, K).transpose() * G;
          }
        }
      });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const Shape& in = x.shape();
  if (order.size() != in.size()) throw DimensionError("permute: order rank mismatch");
  std::vector<bool> seen(in.size(), false);
  for (std::size_t d : order) {
    if (d >= in.size() || seen[d]) throw DimensionError("permute: invalid axis order");
    seen[d] = true;
  }
  const auto in_strides = row_major_strides(in);
  auto plan = std::make_shared<BroadcastPlan>();
  plan->out.resize(in.size());
  plan->stride_a.resize(in.size());
  plan->stride_b.assign(in.size(), 0);
  for (std::size_t d = 0; d < in.size(); ++d) {
    plan->out[d] = in[order[d]];
    plan->stride_a[d] = in_strides[order[d]];
  }
  const auto v = x.values();
  std::vector<double> out(v.size());
  for_each_broadcast(*plan, [&](std::size_t o, std::size_t i, std::size_t) { out[o] = v[i]; });
  return Tensor::from_op(plan->out, std::move(out), {x},
                         [x, plan](std::span<const double>, std::span<const double> g) {
                           auto gx = x.grad_mut();
                           for_each_broadcast(*plan, [&](std::size_t o, std::size_t i, std::size_t) {
                             gx[i] += g[o];
                           });
                         });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range");
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) {
        throw DimensionError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(first));
      }
    }
    extents.push_back(s[axis]);
    total += s[axis];
  }
  const AxisSplit sp = split_axis(first, axis, "concat");
  Shape out_shape = first;
  out_shape[axis] = total;
  std::vector<double> out(sp.outer * total * sp.inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].values();
    const std::size_t chunk = extents[p] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(v.data() + o * chunk, chunk, out.data() + (o * total + offset) * sp.inner);
    }
    offset += extents[p];
  }
  return Tensor::from_op(
      std::move(out_shape), std::move(out), parts,
      [parts, extents, total, sp](std::span<const double>, std::span<const double> g) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
          const std::size_t chunk = extents[p] * sp.inner;
          if (parts[p].requires_grad()) {
            auto gp = parts[p].grad_mut();
            for (std::size_t o = 0; o < sp.outer; ++o) {
              const double* src = g.data() + (o * total + offset) * sp.inner;
              double* dst = gp.data() + o * chunk;
              for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
            }
          }
          offset += extents[p];
        }
      });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit sp = split_axis(x.shape(), axis, "slice");
  if (start + length > sp.extent) throw DimensionError("slice: range out of bounds");
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const auto v = x.values();
  const std::size_t chunk = length * sp.inner;
  std::vector<double> out(sp.outer * chunk);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(v.data() + (o * sp.extent + start) * sp.inner, chunk, out.data() + o * chunk);
  }
  return Tensor::from_op(std::move(out_shape), std::move(out), {x},
                         [x, sp, start, chunk](std::span<const double>, std::span<const double> g) {
                           auto gx = x.grad_mut();
                           for (std::size_t o = 0; o < sp.outer; ++o) {
                             double* dst = gx.data() + (o * sp.extent + start) * sp.inner;
                             const double* src = g.data() + o * chunk;
                             for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                           }
                         });
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                            Tensor* weights_out) {
  if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("multi_head_attention: q, k, v must share shape [B, L, D]");
  }
  const std::size_t batch = q.dim(0), len = q.dim(1), d = q.dim(2);
  if (len < 1) throw DimensionError("multi_head_attention: empty sequence");
  if (heads == 0 || d % heads != 0) {
    throw DimensionError("multi_head_attention: model width not divisible by head count");
  }
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto L = static_cast<Eigen::Index>(len);
  const auto DH = static_cast<Eigen::Index>(dh);
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(d));

  std::vector<double> probs(batch * heads * len * len);
  std::vector<double> out(batch * len * d);
  const auto qv = q.values(), kv = k.values(), vv = v.values();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = b * len * d + h * dh;
      ConstStridedMap Q(qv.data() + off, L, DH, stride);
      ConstStridedMap K(kv.data() + off, L, DH, stride);
      ConstStridedMap V(vv.data() + off, L, DH, stride);
      MapMat P(probs.data() + (b * heads + h) * len * len, L, L);
      P.noalias() = (Q * K.transpose()) * inv_sqrt;
      // Scalar loops: vectorised exp/sum would peel by address and change the rounding.
      for (Eigen::Index r = 0; r < L; ++r) {
        double* row = P.data() + r * L;
        double mx = row[0];
        for (Eigen::Index c = 1; c < L; ++c) mx = std::max(mx, row[c]);
        double total = 0.0;
        for (Eigen::Index c = 0; c < L; ++c) {
          row[c] = std::exp(row[c] - mx);
          total += row[c];
        }
        for (Eigen::Index c = 0; c < L; ++c) row[c] /= total;
      }
      StridedMap O(out.data() + off, L, DH, stride);
      O.noalias() = P * V;
    }
  }
  FlopCounter::record(4.0 * static_cast<double>(batch * len * len * d));
  if (weights_out) *weights_out = Tensor({batch, heads, len, len}, probs);

  return Tensor::from_op(
      q.shape(), std::move(out), {q, k, v},
      [q, k, v, batch, len, d, heads, dh, inv_sqrt, probs = std::move(probs)](
          std::span<const double>, std::span<const double> g) {
        const auto L = static_cast<Eigen::Index>(len);
        const auto DH = static_cast<Eigen::Index>(dh);
        const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(d));
        const auto qv = q.values(), kv = k.values(), vv = v.values();
        double* gq = q.requires_grad() ? q.grad_mut().data() : nullptr;
        double* gk = k.requires_grad() ? k.grad_mut().data() : nullptr;
        double* gv = v.requires_grad() ? v.grad_mut().data() : nullptr;
        RowMat dP(L, L);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = b * len * d + h * dh;
            ConstStridedMap Q(qv.data() + off, L, DH, stride);
            ConstStridedMap K(kv.data() + off, L, DH, stride);
            ConstStridedMap V(vv.data() + off, L, DH, stride);
            ConstStridedMap G(g.data() + off, L, DH, stride);
            ConstMapMat P(probs.data() + (b * heads + h) * len * len, L, L);
            if (gv) {
              StridedMap GV(gv + off, L, DH, stride);
              GV.noalias() += P.transpose() * G;
            }
            dP.noalias() = G * V.transpose();
            for (Eigen::Index r = 0; r < L; ++r) {
              double* dr = dP.data() + r * L;
              const double* pr = P.data() + r * L;
              double dot = 0.0;
              for (Eigen::Index c = 0; c < L; ++c) dot += dr[c] * pr[c];
              for (Eigen::Index c = 0; c < L; ++c) dr[c] = pr[c] * (dr[c] - dot);
            }
            dP *= inv_sqrt;
            if (gq) {
              StridedMap GQ(gq + off, L, DH, stride);
              GQ.noalias() += dP * K;
            }
            if (gk) {
              StridedMap GK(gk + off, L, DH, stride);
              GK.noalias() += dP.transpose() * Q;
            }
          }
        }
      });
}

Tensor cross_entropy(const Tensor& logits, const Tensor& targets) {
  if (logits.rank() != 2 || logits.shape() != targets.shape()) {
    throw DimensionError("cross_entropy: logits and targets must both be [B, C]");
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (batch == 0 || classes == 0) throw DimensionError("cross_entropy: empty batch");
  const auto z = logits.values();
  const auto t = targets.values();
  std::vector<double> probs(z.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = z.data() + b * classes;
    double mx = row[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += std::exp(row[c] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < classes; ++c) {
      probs[b * classes + c] = std::exp(row[c] - lse);
      loss -= t[b * classes + c] * (row[c] - lse);
    }
  }
  loss /= static_cast<double>(batch);
  return Tensor::from_op(
      Shape{}, {loss}, {logits},
      [logits, targets, batch, probs = std::move(probs)](std::span<const double>,
                                                         std::span<const double> g) {
        auto gz = logits.grad_mut();
        const auto t = targets.values();
        const double s = g[0] / static_cast<double>(batch);
        for (std::size_t i = 0; i < gz.size(); ++i) gz[i] += s * (probs[i] - t[i]);
      });
}

}  // namespace tsf::numerics
