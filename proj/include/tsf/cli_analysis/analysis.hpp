#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tsf/cli_analysis/table.hpp"
#include "tsf/datapipe/preprocess.hpp"
#include "tsf/model_train/model.hpp"

namespace tsf::cli_analysis {

using datapipe::NormStats;
using datapipe::SensorWindow;
using model_train::TsfModel;

/// Inference on raw windows: normalizes a copy with `stats` when given and
/// collects the forward diagnostics of every batch.
struct InferenceRun {
  std::vector<int> predictions;
  std::vector<model_train::ForwardResult> batches;
};
InferenceRun run_inference(const TsfModel& model, const std::optional<NormStats>& stats,
                           const std::vector<SensorWindow>& windows, std::size_t batch_size = 128);

/// Posture-sensor attention per window, IMU and timestamp:
/// sample_id, imu, t, attn_grav, attn_gyro.
Table attention_table(const InferenceRun& run);

// ---- noise study ----

enum class NoiseKind { kGravimeterHigh, kGyroLow };
std::string to_string(NoiseKind kind);

/// Adds independent noise to each axis of the gravity streams (high-frequency)
/// or gyroscope streams (low-frequency) of every window and IMU. `rms` is in
/// the units of the stream.
void inject_noise(std::vector<SensorWindow>& windows, NoiseKind kind, double rms, std::mt19937_64& rng);

struct NoiseStudyOptions {
  /// Noise RMS as a multiple of the sensor's normalization std (raw units without stats).
  std::vector<double> levels{0.0, 0.5, 1.0, 2.0};
  std::uint64_t seed = 1;
};

struct NoiseRow {
  NoiseKind kind = NoiseKind::kGravimeterHigh;
  double level = 0.0;
  double wf1 = 0.0;
  double mean_attn_grav = 0.0;
  double mean_attn_gyro = 0.0;
};

/// One row per (kind, level); level 0 evaluates the clean windows.
std::vector<NoiseRow> noise_study(const TsfModel& model, const std::optional<NormStats>& stats,
                                  const std::vector<SensorWindow>& windows, const NoiseStudyOptions& options);
Table noise_table(const std::vector<NoiseRow>& rows);

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// ---- edge histograms ----

enum class EdgeKind { kIntra, kInter };
std::string to_string(EdgeKind kind);

/// Nodes alternate (posture, motion) per IMU: same modality is intra, otherwise inter.
EdgeKind edge_kind(std::size_t i, std::size_t j);

struct EdgeRecord {
  std::size_t sample = 0;
  std::size_t t = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  double weight = 0.0;
  EdgeKind kind = EdgeKind::kInter;
  int activity = 0;
};

/// Off-diagonal upper-triangle adjacency entries of every sample and timestamp.
/// Samples whose label is outside `activities` are skipped unless it is empty.
std::vector<EdgeRecord> collect_edges(const TsfModel& model, const std::optional<NormStats>& stats,
                                      const std::vector<SensorWindow>& windows,
                                      const std::set<int>& activities = {});

struct HistogramBin {
  int activity = 0;
  EdgeKind kind = EdgeKind::kInter;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

/// `bins` equal bins over [-1, 1] per (activity, edge kind) present in `edges`;
/// a weight of exactly 1 falls in the last bin.
std::vector<HistogramBin> edge_histograms(const std::vector<EdgeRecord>& edges, std::size_t bins);
Table edge_table(const std::vector<EdgeRecord>& edges);
Table histogram_table(const std::vector<HistogramBin>& bins);

// ---- route spectra ----

using Route = std::array<int, 3>;
/// "LHL"-style label, one letter per selection level.
std::string route_name(const Route& route);

/// Inference routes per window; throws std::runtime_error for models without wavelet selection.
std::vector<Route> infer_routes(const TsfModel& model, const std::optional<NormStats>& stats,
                                const std::vector<SensorWindow>& windows);

struct ChannelRef {
  std::size_t imu = 0;
  std::size_t kind = datapipe::kLinearAccel;
  std::size_t axis = 0;
};
/// Parses "kind[:axis[:imu]]" with kind in {grav, gyro, lacc}.
ChannelRef parse_channel(const std::string& text);

struct RouteSpectrum {
  std::string route;
  std::vector<double> freq_hz;
  std::vector<double> mean_magnitude;
  std::size_t sample_count = 0;
};

/// Averaged periodogram magnitude of one raw input channel per route group,
/// ordered by route name.
std::vector<RouteSpectrum> route_spectra(const std::vector<SensorWindow>& windows,
                                         const std::vector<Route>& routes, const ChannelRef& channel);
Table route_spectra_table(const std::vector<RouteSpectrum>& spectra);
/// sample_id, level, selection in {L, H}.
Table route_dump_table(const std::vector<Route>& routes);

}  // namespace tsf::cli_analysis
