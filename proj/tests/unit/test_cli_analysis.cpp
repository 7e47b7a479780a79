#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "support/gradcheck.hpp"
#include "tsf/cli_analysis/analysis.hpp"
#include "tsf/cli_analysis/cli.hpp"
#include "tsf/datapipe/filters.hpp"
#include "tsf/datapipe/io.hpp"
#include "tsf/model_train/train.hpp"

namespace fs = std::filesystem;
using namespace tsf::cli_analysis;
using tsf::datapipe::SensorWindow;
using tsf::model_train::TsfConfig;

namespace {

TsfConfig small_config(std::size_t imus, std::size_t classes = 3) {
  TsfConfig c;
  c.cconv_channels = 4;
  c.projection_channels = 6;
  c.temporal_channels = 8;
  c.attention_heads = 2;
  c.ff_hidden = 16;
  c.classes = classes;
  c.imu_count = imus;
  c.window = 32;
  c.overlap = 16;
  return c;
}

std::vector<SensorWindow> random_windows(std::size_t n, std::size_t imus, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<SensorWindow> out;
  for (std::size_t i = 0; i < n; ++i) {
    SensorWindow w(imus, len);
    for (double& v : w.data) v = d(rng);
    w.label = static_cast<int>(i % 3);
    w.sample_rate_hz = 50.0;
    out.push_back(std::move(w));
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("tsf_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }

 private:
  fs::path path_;
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void expect_csv_round_trip(const fs::path& p) {
  const std::string text = slurp(p);
  std::istringstream in(text);
  const Table t = read_table(in);
  std::ostringstream again;
  write_table(again, t);
  EXPECT_EQ(again.str(), text) << p;
}

constexpr const char* kSmokeConfig =
    "cconv_channels = 4\nprojection_channels = 6\ntemporal_channels = 8\nattention_heads = 2\n"
    "ff_hidden = 16\nepochs = 1\nbatch_size = 32\nruns = 1\n";

}  // namespace

TEST(Table, RoundTripAndErrors) {
  Table t;
  t.header = {"a", "b"};
  t.add_row({"1", "x"});
  t.add_row({"2", ""});
  std::ostringstream out;
  write_table(out, t);
  EXPECT_EQ(out.str(), "a,b\n1,x\n2,\n");
  std::istringstream in(out.str());
  const Table back = read_table(in);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.column("b"), 1u);
  EXPECT_THROW(t.add_row({"1"}), std::invalid_argument);
  std::istringstream ragged("a,b\n1\n");
  EXPECT_THROW(read_table(ragged), tsf::datapipe::IngestionError);
}

TEST(Spearman, KnownValues) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 25, 100}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {0.9, 0.8, 0.7, 0.1}), -1.0);
  // Ranks x = 1..4, y = (1.5, 1.5, 3, 4): rho = 4.5 / sqrt(5 * 4.5).
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {5, 5, 6, 7}), 4.5 / std::sqrt(5.0 * 4.5), 1e-15);
  EXPECT_EQ(spearman({1, 2, 3}, {4, 4, 4}), 0.0);
}

TEST(NoiseInjection, EnergyMatchesRequestedLevel) {
  for (NoiseKind kind : {NoiseKind::kGravimeterHigh, NoiseKind::kGyroLow}) {
    const auto clean = random_windows(5, 2, 128, 1);
    auto noisy = clean;
    std::mt19937_64 rng(2);
    inject_noise(noisy, kind, 0.7, rng);
    const std::size_t target = kind == NoiseKind::kGravimeterHigh ? tsf::datapipe::kGravity : tsf::datapipe::kGyro;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      for (std::size_t p = 0; p < 2; ++p) {
        for (std::size_t k = 0; k < 3; ++k) {
          for (std::size_t a = 0; a < 3; ++a) {
            std::vector<double> diff(128);
            for (std::size_t t = 0; t < 128; ++t) diff[t] = noisy[i].at(p, k, a, t) - clean[i].at(p, k, a, t);
            const double r = tsf::datapipe::rms(diff);
            if (k == target) EXPECT_NEAR(r, 0.7, 0.007);
            else EXPECT_EQ(r, 0.0);
          }
        }
      }
    }
  }
}

TEST(NoiseStudy, GridCompleteAndLevelZeroIsClean) {
  const tsf::model_train::TsfModel model(small_config(1));
  const auto windows = random_windows(12, 1, 32, 3);
  NoiseStudyOptions o;
  o.levels = {0.0, 0.5, 1.0};
  const auto rows = noise_study(model, std::nullopt, windows, o);
  ASSERT_EQ(rows.size(), 6u);
  std::vector<int> truth;
  for (const auto& w : windows) truth.push_back(w.label);
  const auto clean = tsf::model_train::evaluate(model, windows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].kind, i < 3 ? NoiseKind::kGravimeterHigh : NoiseKind::kGyroLow);
    EXPECT_EQ(rows[i].level, o.levels[i % 3]);
    EXPECT_NEAR(rows[i].mean_attn_grav + rows[i].mean_attn_gyro, 1.0, 1e-12);
  }
  EXPECT_EQ(rows[0].wf1, clean.weighted_f1);
  EXPECT_EQ(rows[3].wf1, clean.weighted_f1);
  EXPECT_EQ(noise_table(rows).rows.size(), 6u);
}

TEST(Edges, KindsFollowNodeLayout) {
  EXPECT_EQ(edge_kind(0, 1), EdgeKind::kInter);
  EXPECT_EQ(edge_kind(0, 2), EdgeKind::kIntra);
  EXPECT_EQ(edge_kind(1, 3), EdgeKind::kIntra);
  EXPECT_EQ(edge_kind(0, 3), EdgeKind::kInter);
}

TEST(Edges, SinglePositionHasNoIntraEdges) {
  const tsf::model_train::TsfModel model(small_config(1));
  const auto edges = collect_edges(model, std::nullopt, random_windows(4, 1, 32, 4));
  ASSERT_EQ(edges.size(), 4u * 8u);
  for (const auto& e : edges) EXPECT_EQ(e.kind, EdgeKind::kInter);
}

TEST(Edges, HistogramsConserveCounts) {
  const tsf::model_train::TsfModel model(small_config(3));
  const auto windows = random_windows(6, 3, 32, 5);
  const auto edges = collect_edges(model, std::nullopt, windows);
  ASSERT_EQ(edges.size(), 6u * 8u * 15u);
  std::size_t intra = 0;
  for (const auto& e : edges) {
    intra += e.kind == EdgeKind::kIntra;
    EXPECT_LE(std::abs(e.weight), 1.0);
  }
  EXPECT_EQ(intra, 6u * 8u * 6u);
  const auto bins = edge_histograms(edges, 10);
  std::size_t total = 0;
  for (const auto& b : bins) total += b.count;
  EXPECT_EQ(total, edges.size());
  EXPECT_EQ(bins.front().lo, -1.0);
  EXPECT_EQ(bins[9].hi, 1.0);

  const auto only = collect_edges(model, std::nullopt, windows, {1});
  EXPECT_EQ(only.size(), 2u * 8u * 15u);
  for (const auto& e : only) EXPECT_EQ(e.activity, 1);
}

TEST(Edges, BoundaryWeightsLandInEndBins) {
  std::vector<EdgeRecord> edges(3);
  edges[0].weight = -1.0;
  edges[1].weight = 1.0;
  edges[2].weight = 0.0;
  const auto bins = edge_histograms(edges, 4);
  ASSERT_EQ(bins.size(), 4u);
  EXPECT_EQ(bins[0].count, 1u);
  EXPECT_EQ(bins[2].count, 1u);
  EXPECT_EQ(bins[3].count, 1u);
}

TEST(Routes, PartitionAndDeterminism) {
  const tsf::model_train::TsfModel model(small_config(1));
  const auto windows = random_windows(20, 1, 32, 6);
  const auto routes = infer_routes(model, std::nullopt, windows);
  EXPECT_EQ(routes, infer_routes(model, std::nullopt, windows));
  const auto spectra = route_spectra(windows, routes, {});
  std::size_t total = 0;
  for (const auto& s : spectra) total += s.sample_count;
  EXPECT_EQ(total, windows.size());
  EXPECT_EQ(route_dump_table(routes).rows.size(), 60u);

  TsfConfig none = small_config(1);
  none.temporal_reduction = tsf::temporal_fusion::TemporalReduction::kNone;
  EXPECT_THROW(infer_routes(tsf::model_train::TsfModel(none), std::nullopt, windows), std::runtime_error);
}

TEST(Routes, ToneSpectrumPeaksAtTone) {
  std::vector<SensorWindow> windows(3, SensorWindow(1, 100));
  for (auto& w : windows) {
    w.sample_rate_hz = 50.0;
    for (std::size_t t = 0; t < 100; ++t) w.at(0, tsf::datapipe::kGyro, 1, t) = std::sin(2 * std::numbers::pi * 2.0 * t / 50.0);
  }
  const auto spectra = route_spectra(windows, std::vector<Route>(3, Route{0, 1, 0}), parse_channel("gyro:1"));
  ASSERT_EQ(spectra.size(), 1u);
  EXPECT_EQ(spectra[0].route, "LHL");
  const auto& m = spectra[0].mean_magnitude;
  const std::size_t peak = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
  EXPECT_DOUBLE_EQ(spectra[0].freq_hz[peak], 2.0);
}

TEST(Routes, ChannelParsing) {
  const ChannelRef c = parse_channel("grav:2:1");
  EXPECT_EQ(c.kind, tsf::datapipe::kGravity);
  EXPECT_EQ(c.axis, 2u);
  EXPECT_EQ(c.imu, 1u);
  EXPECT_THROW(parse_channel("mag"), std::invalid_argument);
  EXPECT_THROW(parse_channel("gyro:3"), std::invalid_argument);
  EXPECT_THROW(parse_channel("gyro:x"), std::invalid_argument);
}

TEST(Cli, SynthIsDeterministic) {
  TempDir dir("synth");
  ASSERT_EQ(cli({"synth", "--seed", "7", "--out-dir", dir / "a"}).code, kExitOk);
  ASSERT_EQ(cli({"synth", "--seed", "7", "--out-dir", dir / "b"}).code, kExitOk);
  EXPECT_EQ(slurp(dir / "a/synthetic.csv"), slurp(dir / "b/synthetic.csv"));
  EXPECT_FALSE(slurp(dir / "a/synthetic.csv").empty());
  ASSERT_EQ(cli({"synth", "--seed", "8", "--out-dir", dir / "c"}).code, kExitOk);
  EXPECT_NE(slurp(dir / "a/synthetic.csv"), slurp(dir / "c/synthetic.csv"));
}

TEST(Cli, UsageErrors) {
  const CliResult no_config = cli({"train", "--data", "x.bin"});
  EXPECT_EQ(no_config.code, kExitUsage);
  EXPECT_NE(no_config.err.find("Usage"), std::string::npos);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"synth", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(cli({"synth", "--help"}).code, kExitOk);
}

TEST(Cli, RuntimeErrorsAreOneLine) {
  TempDir dir("runtime");
  const CliResult r = cli({"eval", "--model", dir / "missing.tsf", "--data", dir / "missing.bin"});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  std::ofstream(dir / "bad.cfg") << "nonsense = 1\n";
  EXPECT_EQ(cli({"loso", "--config", dir / "bad.cfg", "--data", dir / "missing.bin"}).code, kExitRuntime);
}

TEST(Cli, EndToEndPipeline) {
  TempDir dir("e2e");
  std::ofstream(dir / "smoke.cfg") << kSmokeConfig;
  ASSERT_EQ(cli({"synth", "--seed", "7", "--out-dir", dir / "data"}).code, kExitOk);
  ASSERT_EQ(cli({"preprocess", "--input", dir / "data/synthetic.manifest", "--out-dir", dir / "win"}).code, kExitOk);
  const std::string data = dir / "win/windows.bin";

  const CliResult loso = cli({"loso", "--config", dir / "smoke.cfg", "--data", data, "--out-dir", dir / "loso"});
  ASSERT_EQ(loso.code, kExitOk) << loso.err;
  for (int f = 0; f < 3; ++f) {
    const fs::path report = dir.path() / "loso" / ("fold_run0_fold" + std::to_string(f) + ".json");
    ASSERT_TRUE(fs::exists(report));
    const auto j = nlohmann::json::parse(slurp(report));
    EXPECT_EQ(j["subject"].get<int>(), f);
    EXPECT_EQ(j["test_windows"].get<std::size_t>(), 200u);
    EXPECT_GT(j["flops_per_forward"].get<double>(), 0.0);
  }
  const auto summary = nlohmann::json::parse(slurp(dir / "loso/loso_report.json"));
  EXPECT_EQ(summary["folds"].size(), 3u);

  ASSERT_EQ(cli({"train", "--config", dir / "smoke.cfg", "--data", data, "--out-dir", dir / "model"}).code, kExitOk);
  const std::string model = dir / "model/model.tsf";
  ASSERT_EQ(cli({"eval", "--model", model, "--data", dir / "data/synthetic.manifest", "--out-dir", dir / "eval"}).code,
            kExitOk);
  ASSERT_EQ(cli({"analyze-noise", "--model", model, "--data", data, "--levels", "0,1", "--out-dir", dir / "an"}).code,
            kExitOk);
  ASSERT_EQ(cli({"analyze-edges", "--model", model, "--data", data, "--out-dir", dir / "an"}).code, kExitOk);
  ASSERT_EQ(cli({"analyze-routes", "--model", model, "--data", data, "--out-dir", dir / "an"}).code, kExitOk);

  const Table noise = load_table(dir / "an/noise_attention.csv");
  EXPECT_EQ(noise.rows.size(), 4u);
  EXPECT_EQ(noise.rows[0][noise.column("wf1")], noise.rows[2][noise.column("wf1")]);
  const Table attn = load_table(dir / "eval/attention_log.csv");
  EXPECT_EQ(attn.rows.size(), 600u * 128u);
  const auto eval = nlohmann::json::parse(slurp(dir / "eval/eval_report.json"));
  EXPECT_EQ(tsf::datapipe::format_number(eval["weighted_f1"].get<double>()), noise.rows[0][noise.column("wf1")]);

  for (const std::string report : {"noise_report.json", "edge_report.json", "route_report.json"}) {
    const auto j = nlohmann::json::parse(slurp(dir.path() / "an" / report));
    for (const auto& out : j["outputs"]) {
      const fs::path p = dir.path() / "an" / out.get<std::string>();
      ASSERT_TRUE(fs::exists(p)) << p;
      EXPECT_FALSE(load_table(p).rows.empty());
    }
  }
  const Table routes = load_table(dir / "an/route_spectra.csv");
  std::map<std::string, std::size_t> counts;
  for (const auto& row : routes.rows) counts[row[0]] = std::stoul(row[3]);
  std::size_t total = 0;
  for (const auto& [route, n] : counts) total += n;
  EXPECT_EQ(total, 600u);

  for (const auto& entry : fs::recursive_directory_iterator(dir.path()))
    if (entry.path().extension() == ".csv") expect_csv_round_trip(entry.path());
}
