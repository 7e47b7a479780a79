#include "tsf/datapipe/filters.hpp"

#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace tsf::datapipe {

std::vector<Sos> butterworth(int order, double cutoff_hz, double fs, bool low_pass) {
  if (order < 1) throw PreprocessError("butterworth: order must be >= 1");
  if (!(fs > 0.0) || !(cutoff_hz > 0.0) || cutoff_hz >= fs / 2.0) {
    throw PreprocessError("butterworth: cutoff must lie in (0, fs/2)");
  }
  const double k = 2.0 * fs;
  const double wc = k * std::tan(std::numbers::pi * cutoff_hz / fs);
  std::vector<Sos> sos;
  for (int i = 1; i <= order / 2; ++i) {
    const double theta = std::numbers::pi * (2.0 * i + order - 1) / (2.0 * order);
    const double re = std::cos(theta);
    const double a0 = k * k - 2.0 * re * wc * k + wc * wc;
    const double a1 = 2.0 * wc * wc - 2.0 * k * k;
    const double a2 = k * k + 2.0 * re * wc * k + wc * wc;
    if (low_pass) {
      const double g = wc * wc / a0;
      sos.push_back({g, 2.0 * g, g, 1.0, a1 / a0, a2 / a0});
    } else {
      const double g = k * k / a0;
      sos.push_back({g, -2.0 * g, g, 1.0, a1 / a0, a2 / a0});
    }
  }
  if (order % 2 == 1) {
    const double d = k + wc;
    const double a1 = (wc - k) / d;
    if (low_pass) {
      sos.push_back({wc / d, wc / d, 0.0, 1.0, a1, 0.0});
    } else {
      sos.push_back({k / d, -k / d, 0.0, 1.0, a1, 0.0});
    }
  }
  return sos;
}

namespace {

struct SectionState {
  double z0 = 0.0;
  double z1 = 0.0;
};

void run_sections(const std::vector<Sos>& sos, std::vector<SectionState> state,
                  std::vector<double>& x) {
  for (double& v : x) {
    double s = v;
    for (std::size_t i = 0; i < sos.size(); ++i) {
      const Sos& c = sos[i];
      SectionState& z = state[i];
      const double y = c[0] * s + z.z0;
      z.z0 = c[1] * s - c[4] * y + z.z1;
      z.z1 = c[2] * s - c[5] * y;
      s = y;
    }
    v = s;
  }
}

// Steady-state transposed direct-form state for a unit step input.
std::vector<SectionState> steady_state(const std::vector<Sos>& sos) {
  std::vector<SectionState> zi(sos.size());
  double gain = 1.0;
  for (std::size_t i = 0; i < sos.size(); ++i) {
    const Sos& c = sos[i];
    const double b1 = c[1] - c[4] * c[0];
    const double b2 = c[2] - c[5] * c[0];
    const double z0 = (b1 + b2) / (1.0 + c[4] + c[5]);
    zi[i].z0 = gain * z0;
    zi[i].z1 = gain * (b2 - c[5] * z0);
    gain *= (c[0] + c[1] + c[2]) / (1.0 + c[4] + c[5]);
  }
  return zi;
}

std::vector<SectionState> scaled(const std::vector<SectionState>& zi, double s) {
  std::vector<SectionState> out = zi;
  for (auto& z : out) {
    z.z0 *= s;
    z.z1 *= s;
  }
  return out;
}

}  // namespace

std::vector<double> sosfilt(const std::vector<Sos>& sos, const std::vector<double>& x) {
  std::vector<double> y = x;
  run_sections(sos, std::vector<SectionState>(sos.size()), y);
  return y;
}

std::vector<double> sosfiltfilt(const std::vector<Sos>& sos, const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) throw PreprocessError("sosfiltfilt: need at least 2 samples");
  std::size_t b2_zero = 0, a2_zero = 0;
  for (const Sos& c : sos) {
    b2_zero += c[2] == 0.0;
    a2_zero += c[5] == 0.0;
  }
  const std::size_t taps = 2 * sos.size() + 1 - std::min(b2_zero, a2_zero);
  const std::size_t padlen = std::min<std::size_t>(n - 1, 3 * taps);
  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi = steady_state(sos);
  run_sections(sos, scaled(zi, ext.front()), ext);
  std::reverse(ext.begin(), ext.end());
  run_sections(sos, scaled(zi, ext.front()), ext);
  std::reverse(ext.begin(), ext.end());
  return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(padlen),
                             ext.begin() + static_cast<std::ptrdiff_t>(padlen + n));
}

GravitySplit butterworth_gravity_split(const Axes& accel, double fs) {
  const std::size_t n = axes_length(accel);
  if (n <= 6 * static_cast<std::size_t>(kGravityFilterOrder)) {
    throw PreprocessError("gravity split: signal of " + std::to_string(n) +
                          " samples is too short (need more than " +
                          std::to_string(6 * kGravityFilterOrder) + ")");
  }
  if (!(fs > 2.0 * kGravityCutoffHz)) {
    throw PreprocessError("gravity split: sample rate must exceed 0.6 Hz");
  }
  const auto sos = butterworth(kGravityFilterOrder, kGravityCutoffHz, fs, true);
  GravitySplit out;
  for (std::size_t a = 0; a < 3; ++a) {
    if (accel[a].size() != n) throw PreprocessError("gravity split: axis length mismatch");
    out.gravity[a] = sosfiltfilt(sos, accel[a]);
    out.linear[a].resize(n);
    for (std::size_t t = 0; t < n; ++t) out.linear[a][t] = accel[a][t] - out.gravity[a][t];
  }
  return out;
}

double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

namespace {

std::vector<double> rescale_to_rms(std::vector<double> x, double target) {
  const double r = rms(x);
  if (r > 0.0) {
    for (double& v : x) v *= target / r;
  }
  return x;
}

}  // namespace

std::vector<double> high_frequency_noise(std::size_t length, double fs, double level,
                                         std::mt19937_64& rng) {
  if (length == 0 || level == 0.0) return std::vector<double>(length, 0.0);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> w(length);
  for (double& v : w) v = d(rng);
  if (length > 1) w = sosfilt(butterworth(4, fs / 4.0, fs, false), w);
  return rescale_to_rms(std::move(w), level);
}

std::vector<double> low_frequency_noise(std::size_t length, double fs, double level,
                                        std::mt19937_64& rng) {
  if (length == 0 || level == 0.0) return std::vector<double>(length, 0.0);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> w(length);
  double acc = 0.0;
  for (double& v : w) v = (acc += d(rng));
  if (fs > 1.0 && length > 1) w = sosfilt(butterworth(2, 0.5, fs, true), w);
  double m = 0.0;
  for (double v : w) m += v;
  m /= static_cast<double>(length);
  for (double& v : w) v -= m;
  return rescale_to_rms(std::move(w), level);
}

std::vector<double> periodogram_magnitude(const std::vector<double>& x) {
  if (x.empty()) return {};
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);
  const std::size_t n = x.size();
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(spec[k]) / static_cast<double>(n);
  return mag;
}

}  // namespace tsf::datapipe
