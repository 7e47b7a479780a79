#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsf::datapipe {

/// Signal too short or otherwise unsuitable for filtering.
class PreprocessError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid synthetic-data specification.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Three equally long axis streams (x, y, z).
using Axes = std::array<std::vector<double>, 3>;

std::size_t axes_length(const Axes& a);
Axes make_axes(std::size_t length, double value = 0.0);

struct ImuStream {
  Axes accel;
  Axes gyro;
  std::optional<Axes> gravity;
};

struct RawRecording {
  int subject_id = 0;
  int trial_id = 0;
  int activity_label = 0;
  double sample_rate_hz = 0.0;
  std::vector<ImuStream> imus;
  /// Original timestamps in seconds, when ingested from a file.
  std::vector<double> timestamps;

  std::size_t length() const;
  /// Throws PreprocessError when streams disagree in length or the rate is not positive.
  void validate() const;
};

/// Sensor kinds in the order they are stacked inside a window.
enum SensorKind : std::size_t { kGravity = 0, kGyro = 1, kLinearAccel = 2 };
inline constexpr std::size_t kSensorKinds = 3;

/// One segmented sample laid out as [P][K][3][L].
struct SensorWindow {
  std::size_t imu_count = 0;
  std::size_t length = 0;
  std::vector<double> data;
  int label = 0;
  int subject_id = 0;
  int trial_id = 0;
  double sample_rate_hz = 0.0;

  SensorWindow() = default;
  SensorWindow(std::size_t imus, std::size_t len);

  std::size_t offset(std::size_t imu, std::size_t kind, std::size_t axis) const {
    return ((imu * kSensorKinds + kind) * 3 + axis) * length;
  }
  double& at(std::size_t imu, std::size_t kind, std::size_t axis, std::size_t t) {
    return data[offset(imu, kind, axis) + t];
  }
  double at(std::size_t imu, std::size_t kind, std::size_t axis, std::size_t t) const {
    return data[offset(imu, kind, axis) + t];
  }
};

}  // namespace tsf::datapipe
