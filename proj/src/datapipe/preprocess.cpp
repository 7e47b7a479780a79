#include "tsf/datapipe/preprocess.hpp"

#include <cmath>

#include "tsf/datapipe/filters.hpp"

namespace tsf::datapipe {

std::vector<ProcessedImu> separate_gravity(const RawRecording& rec) {
  rec.validate();
  std::vector<ProcessedImu> out;
  out.reserve(rec.imus.size());
  for (const ImuStream& s : rec.imus) {
    ProcessedImu p;
    p.gyro = s.gyro;
    if (s.gravity) {
      p.gravity = *s.gravity;
      for (std::size_t a = 0; a < 3; ++a) {
        p.linear[a].resize(s.accel[a].size());
        for (std::size_t t = 0; t < s.accel[a].size(); ++t) {
          p.linear[a][t] = s.accel[a][t] - p.gravity[a][t];
        }
      }
    } else {
      GravitySplit split = butterworth_gravity_split(s.accel, rec.sample_rate_hz);
      p.gravity = std::move(split.gravity);
      p.linear = std::move(split.linear);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::size_t window_count(std::size_t length, std::size_t window, std::size_t overlap) {
  if (window == 0 || overlap >= window) {
    throw PreprocessError("segment: require 0 <= overlap < window");
  }
  if (window > length) return 0;
  return (length - window) / (window - overlap) + 1;
}

SegmentResult segment(const RawRecording& rec, std::size_t window, std::size_t overlap) {
  const std::size_t t_len = rec.length();
  const std::size_t count = window_count(t_len, window, overlap);
  SegmentResult result;
  if (count == 0) {
    result.too_short = true;
    return result;
  }
  const auto streams = separate_gravity(rec);
  const std::size_t stride = window - overlap;
  for (std::size_t w = 0; w < count; ++w) {
    SensorWindow sw(streams.size(), window);
    sw.label = rec.activity_label;
    sw.subject_id = rec.subject_id;
    sw.trial_id = rec.trial_id;
    sw.sample_rate_hz = rec.sample_rate_hz;
    const std::size_t start = w * stride;
    for (std::size_t p = 0; p < streams.size(); ++p) {
      const Axes* kinds[kSensorKinds] = {&streams[p].gravity, &streams[p].gyro, &streams[p].linear};
      for (std::size_t k = 0; k < kSensorKinds; ++k) {
        for (std::size_t a = 0; a < 3; ++a) {
          const double* src = (*kinds[k])[a].data() + start;
          std::copy(src, src + window, sw.data.begin() + static_cast<std::ptrdiff_t>(sw.offset(p, k, a)));
        }
      }
    }
    result.windows.push_back(std::move(sw));
  }
  return result;
}

NormStats fit_normalization(const std::vector<SensorWindow>& windows) {
  if (windows.empty()) throw PreprocessError("normalization: empty dataset");
  std::array<double, kSensorKinds> sum{}, count{};
  for (const SensorWindow& w : windows) {
    for (std::size_t p = 0; p < w.imu_count; ++p)
      for (std::size_t k = 0; k < kSensorKinds; ++k)
        for (std::size_t a = 0; a < 3; ++a) {
          const double* x = w.data.data() + w.offset(p, k, a);
          for (std::size_t t = 0; t < w.length; ++t) sum[k] += x[t];
          count[k] += static_cast<double>(w.length);
        }
  }
  NormStats s;
  for (std::size_t k = 0; k < kSensorKinds; ++k) s.mean[k] = sum[k] / count[k];
  // Second pass corrects the rounding of the first mean.
  std::array<double, kSensorKinds> resid{};
  for (const SensorWindow& w : windows) {
    for (std::size_t p = 0; p < w.imu_count; ++p)
      for (std::size_t k = 0; k < kSensorKinds; ++k)
        for (std::size_t a = 0; a < 3; ++a) {
          const double* x = w.data.data() + w.offset(p, k, a);
          for (std::size_t t = 0; t < w.length; ++t) resid[k] += x[t] - s.mean[k];
        }
  }
  for (std::size_t k = 0; k < kSensorKinds; ++k) s.mean[k] += resid[k] / count[k];
  std::array<double, kSensorKinds> sq{};
  for (const SensorWindow& w : windows) {
    for (std::size_t p = 0; p < w.imu_count; ++p)
      for (std::size_t k = 0; k < kSensorKinds; ++k)
        for (std::size_t a = 0; a < 3; ++a) {
          const double* x = w.data.data() + w.offset(p, k, a);
          for (std::size_t t = 0; t < w.length; ++t) sq[k] += (x[t] - s.mean[k]) * (x[t] - s.mean[k]);
        }
  }
  for (std::size_t k = 0; k < kSensorKinds; ++k) {
    s.std[k] = std::max(std::sqrt(sq[k] / count[k]), kStdFloor);
  }
  return s;
}

void apply_normalization(SensorWindow& w, const NormStats& s) {
  for (std::size_t p = 0; p < w.imu_count; ++p)
    for (std::size_t k = 0; k < kSensorKinds; ++k)
      for (std::size_t a = 0; a < 3; ++a) {
        double* x = w.data.data() + w.offset(p, k, a);
        for (std::size_t t = 0; t < w.length; ++t) x[t] = (x[t] - s.mean[k]) / s.std[k];
      }
}

void apply_normalization(std::vector<SensorWindow>& windows, const NormStats& s) {
  for (SensorWindow& w : windows) apply_normalization(w, s);
}

void invert_normalization(std::vector<SensorWindow>& windows, const NormStats& s) {
  for (SensorWindow& w : windows) {
    for (std::size_t p = 0; p < w.imu_count; ++p)
      for (std::size_t k = 0; k < kSensorKinds; ++k)
        for (std::size_t a = 0; a < 3; ++a) {
          double* x = w.data.data() + w.offset(p, k, a);
          for (std::size_t t = 0; t < w.length; ++t) x[t] = x[t] * s.std[k] + s.mean[k];
        }
  }
}

NormStats znormalize(std::vector<SensorWindow>& windows) {
  NormStats s = fit_normalization(windows);
  apply_normalization(windows, s);
  return s;
}

std::vector<double> resample_linear(const std::vector<double>& x, double from_hz, double to_hz) {
  if (!(from_hz > 0.0) || !(to_hz > 0.0)) throw PreprocessError("resample: rates must be positive");
  if (x.size() < 2) throw PreprocessError("resample: need at least 2 samples");
  if (from_hz == to_hz) return x;
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(x.size()) * to_hz / from_hz));
  std::vector<double> y(n_out);
  const double step = from_hz / to_hz;
  const std::size_t last = x.size() - 1;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto j = static_cast<std::size_t>(std::floor(pos));
    if (j >= last) {
      y[i] = x[last];
      continue;
    }
    const double f = pos - static_cast<double>(j);
    y[i] = f == 0.0 ? x[j] : x[j] + f * (x[j + 1] - x[j]);
  }
  return y;
}

Axes resample_linear(const Axes& stream, double from_hz, double to_hz) {
  return {resample_linear(stream[0], from_hz, to_hz), resample_linear(stream[1], from_hz, to_hz),
          resample_linear(stream[2], from_hz, to_hz)};
}

RawRecording resample_recording(const RawRecording& rec, double to_hz) {
  rec.validate();
  RawRecording out = rec;
  out.sample_rate_hz = to_hz;
  out.timestamps.clear();
  for (ImuStream& s : out.imus) {
    s.accel = resample_linear(s.accel, rec.sample_rate_hz, to_hz);
    s.gyro = resample_linear(s.gyro, rec.sample_rate_hz, to_hz);
    if (s.gravity) s.gravity = resample_linear(*s.gravity, rec.sample_rate_hz, to_hz);
  }
  return out;
}

}  // namespace tsf::datapipe
