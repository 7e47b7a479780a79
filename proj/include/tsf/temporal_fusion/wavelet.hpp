#pragma once

#include <array>

#include "tsf/numerics/tensor.hpp"

namespace tsf::temporal_fusion {

using numerics::Tensor;

inline constexpr std::size_t kWaveletTaps = 8;

/// Quadrature mirror pair of decomposition filters.
struct WaveletFilterPair {
  std::array<double, kWaveletTaps> low{};
  std::array<double, kWaveletTaps> high{};
};

/// Daubechies-4 (8 taps) analysis filters, h_w = (-1)^(w+1) l_(7-w).
/// Validated against the orthonormality invariants on first use.
const WaveletFilterPair& db4();

/// Throws std::logic_error when Σl != √2, Σh != 0, |l| != 1 or <l, h> != 0 beyond `tol`.
void check_wavelet_invariants(const WaveletFilterPair& f, double tol = 1e-10);

struct DwtOutput {
  Tensor low;
  Tensor high;
};

/// One analysis level along the trailing axis:
///   low[t] = Σ_w l_w x[(2t + 1 - w) mod L], high likewise with h.
/// Odd L is first extended by repeating the last sample, so both outputs have
/// ⌈L/2⌉ samples. Throws DimensionError when L < 2.
DwtOutput dwt_step(const Tensor& x, const WaveletFilterPair& filters = db4());

/// Average of adjacent sample pairs along the trailing axis (odd L padded as in dwt_step).
Tensor avg_pool2(const Tensor& x);

inline std::size_t half_length(std::size_t len) { return (len + 1) / 2; }

}  // namespace tsf::temporal_fusion
