#include "tsf/cli_analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "tsf/datapipe/filters.hpp"
#include "tsf/datapipe/io.hpp"
#include "tsf/model_train/metrics.hpp"
#include "tsf/model_train/train.hpp"

namespace tsf::cli_analysis {

using datapipe::format_number;

InferenceRun run_inference(const TsfModel& model, const std::optional<NormStats>& stats,
                           const std::vector<SensorWindow>& windows, std::size_t batch_size) {
  InferenceRun run;
  if (stats) {
    std::vector<SensorWindow> copy = windows;
    datapipe::apply_normalization(copy, *stats);
    run.predictions = model_train::predict(model, copy, &run.batches, batch_size);
  } else {
    run.predictions = model_train::predict(model, windows, &run.batches, batch_size);
  }
  return run;
}

Table attention_table(const InferenceRun& run) {
  Table table;
  table.header = {"sample_id", "imu", "t", "attn_grav", "attn_gyro"};
  std::size_t sample = 0;
  for (const auto& r : run.batches) {
    const auto& s = r.attention.shape();  // [B, P, 2, L]
    const auto v = r.attention.values();
    for (std::size_t b = 0; b < s[0]; ++b, ++sample)
      for (std::size_t p = 0; p < s[1]; ++p)
        for (std::size_t t = 0; t < s[3]; ++t) {
          const std::size_t base = ((b * s[1] + p) * 2) * s[3] + t;
          table.add_row({std::to_string(sample), std::to_string(p), std::to_string(t), format_number(v[base]),
                         format_number(v[base + s[3]])});
        }
  }
  return table;
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::kGravimeterHigh ? "grav_high" : "gyro_low";
}

void inject_noise(std::vector<SensorWindow>& windows, NoiseKind kind, double rms, std::mt19937_64& rng) {
  const std::size_t sensor = kind == NoiseKind::kGravimeterHigh ? datapipe::kGravity : datapipe::kGyro;
  for (SensorWindow& w : windows) {
    for (std::size_t p = 0; p < w.imu_count; ++p) {
      for (std::size_t a = 0; a < 3; ++a) {
        const auto noise = kind == NoiseKind::kGravimeterHigh
                               ? datapipe::high_frequency_noise(w.length, w.sample_rate_hz, rms, rng)
                               : datapipe::low_frequency_noise(w.length, w.sample_rate_hz, rms, rng);
        double* x = w.data.data() + w.offset(p, sensor, a);
        for (std::size_t t = 0; t < w.length; ++t) x[t] += noise[t];
      }
    }
  }
}

namespace {

struct AttentionMeans {
  double grav = 0.0;
  double gyro = 0.0;
};

AttentionMeans mean_attention(const std::vector<model_train::ForwardResult>& batches) {
  double grav = 0.0, gyro = 0.0;
  std::size_t n = 0;
  for (const auto& r : batches) {
    const auto& s = r.attention.shape();
    const std::size_t len = s[3];
    const auto v = r.attention.values();
    for (std::size_t bp = 0; bp < s[0] * s[1]; ++bp) {
      for (std::size_t t = 0; t < len; ++t) {
        grav += v[(bp * 2) * len + t];
        gyro += v[(bp * 2 + 1) * len + t];
      }
      n += len;
    }
  }
  if (n == 0) return {};
  return {grav / static_cast<double>(n), gyro / static_cast<double>(n)};
}

std::vector<int> labels_of(const std::vector<SensorWindow>& windows) {
  std::vector<int> y;
  y.reserve(windows.size());
  for (const auto& w : windows) y.push_back(w.label);
  return y;
}

}  // namespace

std::vector<NoiseRow> noise_study(const TsfModel& model, const std::optional<NormStats>& stats,
                                  const std::vector<SensorWindow>& windows, const NoiseStudyOptions& options) {
  if (windows.empty()) throw std::invalid_argument("noise study: no windows");
  const std::vector<int> truth = labels_of(windows);
  std::vector<NoiseRow> rows;
  for (NoiseKind kind : {NoiseKind::kGravimeterHigh, NoiseKind::kGyroLow}) {
    const std::size_t sensor = kind == NoiseKind::kGravimeterHigh ? datapipe::kGravity : datapipe::kGyro;
    const double unit = stats ? stats->std[sensor] : 1.0;
    for (std::size_t li = 0; li < options.levels.size(); ++li) {
      const double level = options.levels[li];
      if (level < 0.0) throw std::invalid_argument("noise level must be non-negative");
      std::vector<SensorWindow> noisy = windows;
      if (level > 0.0) {
        std::seed_seq seq{options.seed, static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(li)};
        std::mt19937_64 rng(seq);
        inject_noise(noisy, kind, level * unit, rng);
      }
      const InferenceRun run = run_inference(model, stats, noisy);
      const auto m = model_train::compute_metrics(truth, run.predictions, model.config().classes);
      const AttentionMeans a = mean_attention(run.batches);
      rows.push_back({kind, level, m.weighted_f1, a.grav, a.gyro});
    }
  }
  return rows;
}

Table noise_table(const std::vector<NoiseRow>& rows) {
  Table t;
  t.header = {"noise_kind", "level", "wf1", "mean_attn_grav", "mean_attn_gyro"};
  for (const auto& r : rows)
    t.add_row({to_string(r.kind), format_number(r.level), format_number(r.wf1), format_number(r.mean_attn_grav),
               format_number(r.mean_attn_gyro)});
  return t;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length series");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::string to_string(EdgeKind kind) { return kind == EdgeKind::kIntra ? "intra" : "inter"; }

EdgeKind edge_kind(std::size_t i, std::size_t j) { return i % 2 == j % 2 ? EdgeKind::kIntra : EdgeKind::kInter; }

std::vector<EdgeRecord> collect_edges(const TsfModel& model, const std::optional<NormStats>& stats,
                                      const std::vector<SensorWindow>& windows, const std::set<int>& activities) {
  std::vector<SensorWindow> selected;
  for (const auto& w : windows)
    if (activities.empty() || activities.count(w.label)) selected.push_back(w);
  std::vector<EdgeRecord> edges;
  if (selected.empty()) return edges;
  const InferenceRun run = run_inference(model, stats, selected);
  std::size_t sample = 0;
  for (const auto& r : run.batches) {
    const auto& s = r.adjacency.shape();  // [B, L', N, N]
    const auto v = r.adjacency.values();
    const std::size_t len = s[1], n = s[2];
    for (std::size_t b = 0; b < s[0]; ++b, ++sample) {
      for (std::size_t t = 0; t < len; ++t) {
        const double* a = v.data() + ((b * len + t) * n) * n;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j)
            edges.push_back({sample, t, i, j, a[i * n + j], edge_kind(i, j), selected[sample].label});
      }
    }
  }
  return edges;
}

std::vector<HistogramBin> edge_histograms(const std::vector<EdgeRecord>& edges, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  std::map<std::pair<int, int>, std::vector<std::size_t>> counts;
  for (const auto& e : edges) {
    auto& c = counts[{e.activity, static_cast<int>(e.kind)}];
    c.resize(bins, 0);
    const double pos = (std::clamp(e.weight, -1.0, 1.0) + 1.0) / 2.0 * static_cast<double>(bins);
    ++c[std::min(static_cast<std::size_t>(pos), bins - 1)];
  }
  std::vector<HistogramBin> out;
  for (const auto& [key, c] : counts) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double lo = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(bins);
      const double hi = k + 1 == bins ? 1.0 : -1.0 + 2.0 * static_cast<double>(k + 1) / static_cast<double>(bins);
      out.push_back({key.first, static_cast<EdgeKind>(key.second), lo, hi, c[k]});
    }
  }
  return out;
}

Table edge_table(const std::vector<EdgeRecord>& edges) {
  Table t;
  t.header = {"sample_id", "t", "i", "j", "weight", "edge_kind"};
  t.rows.reserve(edges.size());
  for (const auto& e : edges)
    t.add_row({std::to_string(e.sample), std::to_string(e.t), std::to_string(e.i), std::to_string(e.j),
               format_number(e.weight), to_string(e.kind)});
  return t;
}

Table histogram_table(const std::vector<HistogramBin>& bins) {
  Table t;
  t.header = {"activity", "edge_kind", "bin_lo", "bin_hi", "count"};
  for (const auto& b : bins)
    t.add_row({std::to_string(b.activity), to_string(b.kind), format_number(b.lo), format_number(b.hi),
               std::to_string(b.count)});
  return t;
}

std::string route_name(const Route& route) {
  std::string s;
  for (int r : route) s += r == 0 ? 'L' : 'H';
  return s;
}

std::vector<Route> infer_routes(const TsfModel& model, const std::optional<NormStats>& stats,
                                const std::vector<SensorWindow>& windows) {
  if (model.config().temporal_reduction != temporal_fusion::TemporalReduction::kWavelet)
    throw std::runtime_error("model has no wavelet selection");
  const InferenceRun run = run_inference(model, stats, windows);
  std::vector<Route> routes;
  for (const auto& r : run.batches) routes.insert(routes.end(), r.routes.begin(), r.routes.end());
  return routes;
}

ChannelRef parse_channel(const std::string& text) {
  ChannelRef c;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = text.find(':', start);
    parts.push_back(text.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() > 3) throw std::invalid_argument("channel '" + text + "': expected kind[:axis[:imu]]");
  if (parts[0] == "grav") c.kind = datapipe::kGravity;
  else if (parts[0] == "gyro") c.kind = datapipe::kGyro;
  else if (parts[0] == "lacc") c.kind = datapipe::kLinearAccel;
  else throw std::invalid_argument("channel '" + text + "': unknown sensor '" + parts[0] + "'");
  try {
    if (parts.size() > 1) c.axis = std::stoul(parts[1]);
    if (parts.size() > 2) c.imu = std::stoul(parts[2]);
  } catch (const std::exception&) {
    throw std::invalid_argument("channel '" + text + "': bad index");
  }
  if (c.axis > 2) throw std::invalid_argument("channel '" + text + "': axis must be 0, 1 or 2");
  return c;
}

std::vector<RouteSpectrum> route_spectra(const std::vector<SensorWindow>& windows,
                                         const std::vector<Route>& routes, const ChannelRef& channel) {
  if (windows.size() != routes.size()) throw std::invalid_argument("route spectra: one route per window required");
  std::map<std::string, RouteSpectrum> groups;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const SensorWindow& w = windows[i];
    if (channel.imu >= w.imu_count) throw std::invalid_argument("route spectra: IMU index out of range");
    const double* x = w.data.data() + w.offset(channel.imu, channel.kind, channel.axis);
    const auto mag = datapipe::periodogram_magnitude(std::vector<double>(x, x + w.length));
    RouteSpectrum& g = groups[route_name(routes[i])];
    if (g.sample_count == 0) {
      g.route = route_name(routes[i]);
      g.mean_magnitude.assign(mag.size(), 0.0);
      g.freq_hz.resize(mag.size());
      for (std::size_t k = 0; k < mag.size(); ++k)
        g.freq_hz[k] = static_cast<double>(k) * w.sample_rate_hz / static_cast<double>(w.length);
    } else if (g.mean_magnitude.size() != mag.size()) {
      throw std::invalid_argument("route spectra: windows differ in length");
    }
    for (std::size_t k = 0; k < mag.size(); ++k) g.mean_magnitude[k] += mag[k];
    ++g.sample_count;
  }
  std::vector<RouteSpectrum> out;
  for (auto& [name, g] : groups) {
    for (double& m : g.mean_magnitude) m /= static_cast<double>(g.sample_count);
    out.push_back(std::move(g));
  }
  return out;
}

Table route_spectra_table(const std::vector<RouteSpectrum>& spectra) {
  Table t;
  t.header = {"route", "freq_bin_hz", "mean_magnitude", "sample_count"};
  for (const auto& s : spectra)
    for (std::size_t k = 0; k < s.freq_hz.size(); ++k)
      t.add_row({s.route, format_number(s.freq_hz[k]), format_number(s.mean_magnitude[k]),
                 std::to_string(s.sample_count)});
  return t;
}

Table route_dump_table(const std::vector<Route>& routes) {
  Table t;
  t.header = {"sample_id", "level", "selection"};
  for (std::size_t i = 0; i < routes.size(); ++i)
    for (std::size_t l = 0; l < routes[i].size(); ++l)
      t.add_row({std::to_string(i), std::to_string(l + 1), routes[i][l] == 0 ? "L" : "H"});
  return t;
}

}  // namespace tsf::cli_analysis
