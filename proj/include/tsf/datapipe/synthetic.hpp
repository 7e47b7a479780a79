#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsf/datapipe/types.hpp"

namespace tsf::datapipe {

struct ClassSpec {
  std::string name;
  double freq_lo_hz = 1.0;
  double freq_hi_hz = 2.0;
  /// Peak linear acceleration of the dominant oscillation, m/s^2.
  double amplitude = 1.0;
  double roll_rad = 0.0;
  double pitch_rad = 0.0;
  /// Posture sway amplitude (rad) and frequency (Hz).
  double sway_rad = 0.1;
  double sway_hz = 0.2;
};

struct SyntheticSpec {
  std::vector<ClassSpec> classes;
  /// RMS of high-frequency noise added to the accelerometer (gravimeter noise).
  double gravimeter_noise = 0.3;
  /// RMS of low-frequency noise added to the gyroscope.
  double gyro_noise = 0.05;
  int subjects = 3;
  /// Trials per subject and class.
  int trials_per_subject = 2;
  double sample_rate_hz = 50.0;
  std::size_t window = 128;
  std::size_t overlap = 64;
  std::size_t windows_per_trial = 25;
  std::size_t imu_count = 1;
  bool emit_gravimeter = false;
  double gravity = 9.81;

  std::size_t trial_length() const { return window + (windows_per_trial - 1) * (window - overlap); }
  /// Throws SpecError for frequencies at or above Nyquist and non-positive counts.
  void validate() const;
};

/// Four classes separated by oscillation band and posture: 3 subjects, 50 Hz,
/// window 128 / overlap 64, 600 windows in total.
SyntheticSpec default_synthetic_spec();

/// Deterministic in (spec, seed). Recordings are ordered by subject, class, trial.
std::vector<RawRecording> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Gravity vector of magnitude g for the given roll and pitch.
std::array<double, 3> gravity_from_angles(double roll, double pitch, double g);

}  // namespace tsf::datapipe
