#pragma once

#include <array>
#include <random>
#include <vector>

#include "tsf/datapipe/types.hpp"

namespace tsf::datapipe {

/// Biquad [b0, b1, b2, a0 = 1, a1, a2].
using Sos = std::array<double, 6>;

/// Digital Butterworth filter via the bilinear transform with prewarped cutoff,
/// one section per real pole or conjugate pole pair.
std::vector<Sos> butterworth(int order, double cutoff_hz, double sample_rate_hz, bool low_pass);

/// Single forward pass with zero initial state.
std::vector<double> sosfilt(const std::vector<Sos>& sos, const std::vector<double>& x);

/// Zero-phase forward-backward filtering with odd extension of
/// min(T - 1, 3 * taps) samples, where taps = 2 * sections + 1 less the number of
/// first-order sections, and steady-state initial conditions.
std::vector<double> sosfiltfilt(const std::vector<Sos>& sos, const std::vector<double>& x);

inline constexpr int kGravityFilterOrder = 3;
inline constexpr double kGravityCutoffHz = 0.3;

struct GravitySplit {
  Axes gravity;
  Axes linear;
};

/// Zero-phase order-3 low-pass at 0.3 Hz; linear = accel - gravity.
GravitySplit butterworth_gravity_split(const Axes& accel, double sample_rate_hz);

/// White noise high-passed at fs/4, rescaled to the exact requested RMS.
std::vector<double> high_frequency_noise(std::size_t length, double sample_rate_hz, double rms,
                                         std::mt19937_64& rng);
/// Random walk low-passed at 0.5 Hz, mean removed, rescaled to the exact requested RMS.
std::vector<double> low_frequency_noise(std::size_t length, double sample_rate_hz, double rms,
                                        std::mt19937_64& rng);

double rms(const std::vector<double>& x);

/// One-sided periodogram magnitude |X(f)| / n at bins k * fs / n, k = 0..n/2.
std::vector<double> periodogram_magnitude(const std::vector<double>& x);

}  // namespace tsf::datapipe
