#include "tsf/datapipe/types.hpp"

namespace tsf::datapipe {

std::size_t axes_length(const Axes& a) { return a[0].size(); }

Axes make_axes(std::size_t length, double value) {
  return {std::vector<double>(length, value), std::vector<double>(length, value),
          std::vector<double>(length, value)};
}

std::size_t RawRecording::length() const {
  return imus.empty() ? 0 : axes_length(imus.front().accel);
}

void RawRecording::validate() const {
  if (!(sample_rate_hz > 0.0)) throw PreprocessError("recording sample rate must be positive");
  if (imus.empty()) throw PreprocessError("recording has no IMU streams");
  const std::size_t t = length();
  auto check = [t](const Axes& a, const char* what) {
    for (const auto& axis : a) {
      if (axis.size() != t) {
        throw PreprocessError(std::string("recording ") + what + " stream length " +
                              std::to_string(axis.size()) + " differs from " + std::to_string(t));
      }
    }
  };
  for (const ImuStream& s : imus) {
    check(s.accel, "accelerometer");
    check(s.gyro, "gyroscope");
    if (s.gravity) check(*s.gravity, "gravimeter");
  }
  if (!timestamps.empty() && timestamps.size() != t) {
    throw PreprocessError("recording timestamp count differs from stream length");
  }
}

SensorWindow::SensorWindow(std::size_t imus, std::size_t len)
    : imu_count(imus), length(len), data(imus * kSensorKinds * 3 * len, 0.0) {}

}  // namespace tsf::datapipe
