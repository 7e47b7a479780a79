#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tsf/datapipe/preprocess.hpp"
#include "tsf/datapipe/types.hpp"

namespace tsf::datapipe {

/// Maps canonical column names (subject, trial, activity, timestamp_s, imu_id,
/// acc_x .. gyr_z, grav_x .. grav_z) to the header names used in a file.
/// Unmapped columns use their canonical name.
struct ColumnMap {
  std::map<std::string, std::string> rename;
  std::string column(const std::string& canonical) const;
};

/// Parses the recording CSV. Rows are grouped by (subject, trial, activity) and
/// ordered by imu_id; timestamps must increase strictly within each IMU stream.
/// The sample rate is inferred from the timestamps unless `sample_rate_hz` > 0.
std::vector<RawRecording> read_csv(std::istream& in, const ColumnMap& columns = {},
                                   double sample_rate_hz = 0.0);
std::vector<RawRecording> load_csv(const std::filesystem::path& path, const ColumnMap& columns = {},
                                   double sample_rate_hz = 0.0);

/// Writes recordings in the same schema; grav columns are emitted when every
/// recording carries gravimeter streams. Numbers use 12 significant digits.
void write_csv(std::ostream& out, const std::vector<RawRecording>& recordings);
void save_csv(const std::filesystem::path& path, const std::vector<RawRecording>& recordings);

/// Formats a double with 12 significant digits.
std::string format_number(double v);

struct DatasetManifest {
  double sample_rate_hz = 0.0;
  std::size_t window = 128;
  std::size_t overlap = 64;
  /// Target rate for linear resampling; 0 keeps the native rate.
  double resample_hz = 0.0;
  std::string data_file;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Flat key = value file; '#' starts a comment.
std::map<std::string, std::string> read_key_values(std::istream& in);

/// Binary window set with optional normalization statistics.
struct WindowSet {
  std::vector<SensorWindow> windows;
  bool normalized = false;
  NormStats stats;
};

void save_windows(const std::filesystem::path& path, const WindowSet& set);
WindowSet load_windows(const std::filesystem::path& path);

/// Segments every recording (after optional resampling) into windows.
std::vector<SensorWindow> windows_from_recordings(const std::vector<RawRecording>& recordings,
                                                  std::size_t window, std::size_t overlap,
                                                  double resample_hz = 0.0);

}  // namespace tsf::datapipe
