#pragma once

#include <array>
#include <vector>

#include "tsf/datapipe/types.hpp"

namespace tsf::datapipe {

/// Gravity, gyroscope and linear-acceleration streams of one recording.
struct ProcessedImu {
  Axes gravity;
  Axes gyro;
  Axes linear;
};

/// Uses the recording's gravimeter streams when present (linear = accel - gravity),
/// otherwise the Butterworth split.
std::vector<ProcessedImu> separate_gravity(const RawRecording& recording);

struct SegmentResult {
  std::vector<SensorWindow> windows;
  /// Set when the recording is shorter than one window.
  bool too_short = false;
};

/// Sliding windows at stride (window - overlap); the trailing partial window is dropped.
SegmentResult segment(const RawRecording& recording, std::size_t window, std::size_t overlap);

/// Number of windows produced for a stream of `length` samples.
std::size_t window_count(std::size_t length, std::size_t window, std::size_t overlap);

/// Per-sensor-kind statistics pooled over axes, IMUs and windows.
struct NormStats {
  std::array<double, kSensorKinds> mean{};
  std::array<double, kSensorKinds> std{};
};

inline constexpr double kStdFloor = 1e-8;

NormStats fit_normalization(const std::vector<SensorWindow>& windows);
void apply_normalization(std::vector<SensorWindow>& windows, const NormStats& stats);
void apply_normalization(SensorWindow& window, const NormStats& stats);
void invert_normalization(std::vector<SensorWindow>& windows, const NormStats& stats);
/// Fits on `windows` and normalizes them in place.
NormStats znormalize(std::vector<SensorWindow>& windows);

/// Linear interpolation on the uniform source grid; output length
/// round(T * to_hz / from_hz). Positions past the last sample hold its value.
std::vector<double> resample_linear(const std::vector<double>& x, double from_hz, double to_hz);
Axes resample_linear(const Axes& stream, double from_hz, double to_hz);
RawRecording resample_recording(const RawRecording& recording, double to_hz);

}  // namespace tsf::datapipe
