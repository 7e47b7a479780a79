#include "tsf/datapipe/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tsf::datapipe {

namespace {

const char* const kBaseColumns[] = {"subject", "trial", "activity", "timestamp_s", "imu_id",
                                    "acc_x",   "acc_y", "acc_z",    "gyr_x",       "gyr_y",
                                    "gyr_z"};
const char* const kGravColumns[] = {"grav_x", "grav_y", "grav_z"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t row, const std::string& col) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw IngestionError("row " + std::to_string(row) + ": column '" + col +
                         "' is not a number: '" + s + "'");
  }
  if (!std::isfinite(v)) {
    throw IngestionError("row " + std::to_string(row) + ": column '" + col + "' is not finite");
  }
  return v;
}

int parse_int(const std::string& s, std::size_t row, const std::string& col) {
  int v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw IngestionError("row " + std::to_string(row) + ": column '" + col +
                         "' is not an integer: '" + s + "'");
  }
  return v;
}

struct ImuRows {
  std::vector<double> t;
  std::vector<std::size_t> row;
  Axes acc, gyr, grav;
};

struct Group {
  int subject, trial, activity;
  std::map<int, ImuRows> imus;
};

}  // namespace

std::string ColumnMap::column(const std::string& canonical) const {
  auto it = rename.find(canonical);
  return it == rename.end() ? canonical : it->second;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<RawRecording> read_csv(std::istream& in, const ColumnMap& columns,
                                   double sample_rate_hz) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("csv: missing header row");
  if (line.size() >= 3 && std::memcmp(line.data(), "\xEF\xBB\xBF", 3) == 0) line.erase(0, 3);
  const auto header = split_commas(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
  auto locate = [&](const std::string& canonical) -> long {
    auto it = index.find(columns.column(canonical));
    return it == index.end() ? -1 : static_cast<long>(it->second);
  };
  std::vector<std::size_t> base;
  std::vector<std::string> missing;
  for (const char* c : kBaseColumns) {
    const long i = locate(c);
    if (i < 0) missing.push_back(columns.column(c));
    base.push_back(static_cast<std::size_t>(std::max(i, 0L)));
  }
  if (!missing.empty()) {
    std::string msg = "csv: missing required column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw IngestionError(msg);
  }
  std::vector<std::size_t> grav;
  for (const char* c : kGravColumns) {
    const long i = locate(c);
    if (i >= 0) grav.push_back(static_cast<std::size_t>(i));
  }
  if (!grav.empty() && grav.size() != 3) {
    throw IngestionError("csv: gravimeter columns must be given as a complete triple");
  }
  const bool has_grav = grav.size() == 3;

  std::vector<Group> groups;
  std::map<std::tuple<int, int, int>, std::size_t> group_index;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() < header.size()) {
      throw IngestionError("row " + std::to_string(row) + ": expected " +
                           std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()));
    }
    auto cell = [&](std::size_t k) -> const std::string& { return cells[base[k]]; };
    const int subject = parse_int(cell(0), row, kBaseColumns[0]);
    const int trial = parse_int(cell(1), row, kBaseColumns[1]);
    const int activity = parse_int(cell(2), row, kBaseColumns[2]);
    const double ts = parse_double(cell(3), row, kBaseColumns[3]);
    const int imu = parse_int(cell(4), row, kBaseColumns[4]);
    const auto key = std::make_tuple(subject, trial, activity);
    auto [it, inserted] = group_index.emplace(key, groups.size());
    if (inserted) groups.push_back(Group{subject, trial, activity, {}});
    ImuRows& r = groups[it->second].imus[imu];
    if (!r.t.empty() && !(ts > r.t.back())) {
      throw IngestionError("row " + std::to_string(row) + ": timestamp " + cell(3) +
                           " does not increase (previous " + format_number(r.t.back()) +
                           " at row " + std::to_string(r.row.back()) + ")");
    }
    r.t.push_back(ts);
    r.row.push_back(row);
    for (std::size_t a = 0; a < 3; ++a) {
      r.acc[a].push_back(parse_double(cell(5 + a), row, kBaseColumns[5 + a]));
      r.gyr[a].push_back(parse_double(cell(8 + a), row, kBaseColumns[8 + a]));
      if (has_grav) r.grav[a].push_back(parse_double(cells[grav[a]], row, kGravColumns[a]));
    }
  }

  std::vector<RawRecording> out;
  for (Group& g : groups) {
    RawRecording rec;
    rec.subject_id = g.subject;
    rec.trial_id = g.trial;
    rec.activity_label = g.activity;
    const ImuRows& first = g.imus.begin()->second;
    const std::size_t n = first.t.size();
    for (auto& [id, r] : g.imus) {
      if (r.t.size() != n) {
        throw IngestionError("csv: recording (subject " + std::to_string(g.subject) + ", trial " +
                             std::to_string(g.trial) + ", activity " + std::to_string(g.activity) +
                             ") has IMU streams of unequal length");
      }
      ImuStream s;
      s.accel = std::move(r.acc);
      s.gyro = std::move(r.gyr);
      if (has_grav) s.gravity = std::move(r.grav);
      rec.imus.push_back(std::move(s));
    }
    rec.timestamps = first.t;
    if (sample_rate_hz > 0.0) {
      rec.sample_rate_hz = sample_rate_hz;
    } else if (n >= 2) {
      rec.sample_rate_hz = static_cast<double>(n - 1) / (first.t.back() - first.t.front());
    } else {
      throw IngestionError("csv: cannot infer the sample rate of a single-row recording");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RawRecording> load_csv(const std::filesystem::path& path, const ColumnMap& columns,
                                   double sample_rate_hz) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  return read_csv(in, columns, sample_rate_hz);
}

void write_csv(std::ostream& out, const std::vector<RawRecording>& recordings) {
  bool grav = !recordings.empty();
  for (const auto& r : recordings)
    for (const auto& s : r.imus) grav = grav && s.gravity.has_value();
  for (std::size_t i = 0; i < std::size(kBaseColumns); ++i) out << (i ? "," : "") << kBaseColumns[i];
  if (grav) {
    for (const char* c : kGravColumns) out << ',' << c;
  }
  out << '\n';
  for (const RawRecording& r : recordings) {
    r.validate();
    const std::size_t n = r.length();
    for (std::size_t t = 0; t < n; ++t) {
      const double ts = r.timestamps.empty() ? static_cast<double>(t) / r.sample_rate_hz
                                             : r.timestamps[t];
      for (std::size_t p = 0; p < r.imus.size(); ++p) {
        const ImuStream& s = r.imus[p];
        out << r.subject_id << ',' << r.trial_id << ',' << r.activity_label << ','
            << format_number(ts) << ',' << p;
        for (std::size_t a = 0; a < 3; ++a) out << ',' << format_number(s.accel[a][t]);
        for (std::size_t a = 0; a < 3; ++a) out << ',' << format_number(s.gyro[a][t]);
        if (grav) {
          for (std::size_t a = 0; a < 3; ++a) out << ',' << format_number((*s.gravity)[a][t]);
        }
        out << '\n';
      }
    }
  }
}

void save_csv(const std::filesystem::path& path, const std::vector<RawRecording>& recordings) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  write_csv(out, recordings);
}

std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IngestionError("line " + std::to_string(row) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open manifest " + path.string());
  const auto kv = read_key_values(in);
  DatasetManifest m;
  for (const auto& [k, v] : kv) {
    try {
      if (k == "sample_rate_hz") m.sample_rate_hz = std::stod(v);
      else if (k == "window") m.window = std::stoul(v);
      else if (k == "overlap") m.overlap = std::stoul(v);
      else if (k == "resample_hz") m.resample_hz = std::stod(v);
      else if (k == "data_file") m.data_file = v;
      else throw IngestionError("manifest: unknown key '" + k + "'");
    } catch (const std::logic_error&) {
      throw IngestionError("manifest: invalid value for '" + k + "': " + v);
    }
  }
  if (m.window == 0 || m.overlap >= m.window) {
    throw IngestionError("manifest: require 0 <= overlap < window");
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  if (m.sample_rate_hz > 0.0) out << "sample_rate_hz = " << format_number(m.sample_rate_hz) << '\n';
  out << "window = " << m.window << '\n' << "overlap = " << m.overlap << '\n';
  if (m.resample_hz > 0.0) out << "resample_hz = " << format_number(m.resample_hz) << '\n';
  if (!m.data_file.empty()) out << "data_file = " << m.data_file << '\n';
}

namespace {

constexpr char kWindowMagic[8] = {'T', 'S', 'F', 'W', 'I', 'N', '0', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IngestionError("window file truncated");
  return v;
}

}  // namespace

void save_windows(const std::filesystem::path& path, const WindowSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path.string());
  out.write(kWindowMagic, sizeof kWindowMagic);
  put<std::uint64_t>(out, set.windows.size());
  put<std::uint8_t>(out, set.normalized ? 1 : 0);
  for (std::size_t k = 0; k < kSensorKinds; ++k) put(out, set.stats.mean[k]);
  for (std::size_t k = 0; k < kSensorKinds; ++k) put(out, set.stats.std[k]);
  for (const SensorWindow& w : set.windows) {
    put<std::uint64_t>(out, w.imu_count);
    put<std::uint64_t>(out, w.length);
    put<std::int32_t>(out, w.label);
    put<std::int32_t>(out, w.subject_id);
    put<std::int32_t>(out, w.trial_id);
    put(out, w.sample_rate_hz);
    out.write(reinterpret_cast<const char*>(w.data.data()),
              static_cast<std::streamsize>(w.data.size() * sizeof(double)));
  }
  if (!out) throw IngestionError("failed writing " + path.string());
}

WindowSet load_windows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  char magic[sizeof kWindowMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kWindowMagic, sizeof magic) != 0) {
    throw IngestionError(path.string() + " is not a window file");
  }
  WindowSet set;
  const auto count = get<std::uint64_t>(in);
  set.normalized = get<std::uint8_t>(in) != 0;
  for (std::size_t k = 0; k < kSensorKinds; ++k) set.stats.mean[k] = get<double>(in);
  for (std::size_t k = 0; k < kSensorKinds; ++k) set.stats.std[k] = get<double>(in);
  set.windows.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto imus = get<std::uint64_t>(in);
    const auto len = get<std::uint64_t>(in);
    if (imus == 0 || imus > 64 || len == 0 || len > (1u << 20)) {
      throw IngestionError("window file: implausible window header");
    }
    SensorWindow w(imus, len);
    w.label = get<std::int32_t>(in);
    w.subject_id = get<std::int32_t>(in);
    w.trial_id = get<std::int32_t>(in);
    w.sample_rate_hz = get<double>(in);
    in.read(reinterpret_cast<char*>(w.data.data()),
            static_cast<std::streamsize>(w.data.size() * sizeof(double)));
    if (!in) throw IngestionError("window file truncated");
    set.windows.push_back(std::move(w));
  }
  return set;
}

std::vector<SensorWindow> windows_from_recordings(const std::vector<RawRecording>& recordings,
                                                  std::size_t window, std::size_t overlap,
                                                  double resample_hz) {
  std::vector<SensorWindow> out;
  for (const RawRecording& r : recordings) {
    auto seg = resample_hz > 0.0 ? segment(resample_recording(r, resample_hz), window, overlap)
                                 : segment(r, window, overlap);
    for (auto& w : seg.windows) out.push_back(std::move(w));
  }
  return out;
}

}  // namespace tsf::datapipe
