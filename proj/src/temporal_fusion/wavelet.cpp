#include "tsf/temporal_fusion/wavelet.hpp"

#include <cmath>
#include <stdexcept>

#include "tsf/numerics/flops.hpp"

namespace tsf::temporal_fusion {

using numerics::DimensionError;
using numerics::Shape;

namespace {

WaveletFilterPair make_db4() {
  WaveletFilterPair f;
  f.low = {-0.010597401785069032, 0.032883011666885200, 0.030841381835560764,
           -0.18703481171909308,  -0.027983769416859854, 0.63088076792985891,
           0.71484657055291565,   0.23037781330889650};
  for (std::size_t w = 0; w < kWaveletTaps; ++w) {
    const double sign = (w % 2 == 0) ? -1.0 : 1.0;
    f.high[w] = sign * f.low[kWaveletTaps - 1 - w];
  }
  check_wavelet_invariants(f);
  return f;
}

// Row-wise view of x [..., L] with the odd-length extension applied.
struct Rows {
  std::size_t rows;
  std::size_t len;     // original length
  std::size_t padded;  // even length
};

Rows row_layout(const Tensor& x, const char* what) {
  if (x.rank() < 1 || x.shape().back() < 2) {
    throw DimensionError(std::string(what) + ": trailing length must be at least 2");
  }
  const std::size_t len = x.shape().back();
  return {x.numel() / len, len, len + (len % 2)};
}

inline std::size_t src_index(std::size_t padded_index, std::size_t len) {
  return padded_index < len ? padded_index : len - 1;
}

}  // namespace

const WaveletFilterPair& db4() {
  static const WaveletFilterPair filters = make_db4();
  return filters;
}

void check_wavelet_invariants(const WaveletFilterPair& f, double tol) {
  double sl = 0.0, sh = 0.0, ll = 0.0, hh = 0.0, lh = 0.0;
  for (std::size_t w = 0; w < kWaveletTaps; ++w) {
    sl += f.low[w];
    sh += f.high[w];
    ll += f.low[w] * f.low[w];
    hh += f.high[w] * f.high[w];
    lh += f.low[w] * f.high[w];
  }
  if (std::abs(sl - std::sqrt(2.0)) > tol || std::abs(sh) > tol || std::abs(ll - 1.0) > tol ||
      std::abs(hh - 1.0) > tol || std::abs(lh) > tol) {
    throw std::logic_error("wavelet filter pair violates orthonormality invariants");
  }
}

DwtOutput dwt_step(const Tensor& x, const WaveletFilterPair& filters) {
  const Rows r = row_layout(x, "dwt_step");
  const std::size_t half = r.padded / 2;
  Shape out_shape = x.shape();
  out_shape.back() = half;
  const auto xv = x.values();
  std::vector<double> lo(r.rows * half), hi(r.rows * half);
  // Precomputed source index per (t, w).
  std::vector<std::size_t> idx(half * kWaveletTaps);
  for (std::size_t t = 0; t < half; ++t)
    for (std::size_t w = 0; w < kWaveletTaps; ++w) {
      const long p = static_cast<long>(2 * t + 1) - static_cast<long>(w);
      const long m = static_cast<long>(r.padded);
      idx[t * kWaveletTaps + w] = src_index(static_cast<std::size_t>(((p % m) + m) % m), r.len);
    }
  for (std::size_t row = 0; row < r.rows; ++row) {
    const double* src = xv.data() + row * r.len;
    for (std::size_t t = 0; t < half; ++t) {
      double a = 0.0, d = 0.0;
      for (std::size_t w = 0; w < kWaveletTaps; ++w) {
        const double s = src[idx[t * kWaveletTaps + w]];
        a += filters.low[w] * s;
        d += filters.high[w] * s;
      }
      lo[row * half + t] = a;
      hi[row * half + t] = d;
    }
  }
  numerics::FlopCounter::record(4.0 * kWaveletTaps * static_cast<double>(r.rows * half));

  auto make = [&](std::vector<double> vals, const std::array<double, kWaveletTaps>& taps) {
    return Tensor::from_op(out_shape, std::move(vals), {x},
                           [x, r, half, idx, taps](std::span<const double>, std::span<const double> g) {
                             auto gx = x.grad_mut();
                             for (std::size_t row = 0; row < r.rows; ++row) {
                               double* dst = gx.data() + row * r.len;
                               for (std::size_t t = 0; t < half; ++t) {
                                 const double go = g[row * half + t];
                                 for (std::size_t w = 0; w < kWaveletTaps; ++w) {
                                   dst[idx[t * kWaveletTaps + w]] += taps[w] * go;
                                 }
                               }
                             }
                           });
  };
  return {make(std::move(lo), filters.low), make(std::move(hi), filters.high)};
}

Tensor avg_pool2(const Tensor& x) {
  const Rows r = row_layout(x, "avg_pool2");
  const std::size_t half = r.padded / 2;
  Shape out_shape = x.shape();
  out_shape.back() = half;
  const auto xv = x.values();
  std::vector<double> out(r.rows * half);
  for (std::size_t row = 0; row < r.rows; ++row)
    for (std::size_t t = 0; t < half; ++t) {
      out[row * half + t] = 0.5 * (xv[row * r.len + 2 * t] + xv[row * r.len + src_index(2 * t + 1, r.len)]);
    }
  return Tensor::from_op(out_shape, std::move(out), {x},
                         [x, r, half](std::span<const double>, std::span<const double> g) {
                           auto gx = x.grad_mut();
                           for (std::size_t row = 0; row < r.rows; ++row)
                             for (std::size_t t = 0; t < half; ++t) {
                               const double go = 0.5 * g[row * half + t];
                               gx[row * r.len + 2 * t] += go;
                               gx[row * r.len + src_index(2 * t + 1, r.len)] += go;
                             }
                         });
}

}  // namespace tsf::temporal_fusion
