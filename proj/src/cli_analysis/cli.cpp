#include "tsf/cli_analysis/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "tsf/cli_analysis/analysis.hpp"
#include "tsf/cli_analysis/table.hpp"
#include "tsf/datapipe/io.hpp"
#include "tsf/datapipe/synthetic.hpp"
#include "tsf/model_train/config.hpp"
#include "tsf/model_train/serialize.hpp"
#include "tsf/model_train/train.hpp"

namespace tsf::cli_analysis {

namespace fs = std::filesystem;
using datapipe::format_number;
using json = nlohmann::json;
using model_train::TsfConfig;

namespace {

constexpr const char* kFlopConvention = "multiply-accumulate = 2 FLOPs, bias add = 1, activations excluded";

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOptions& common, bool config_required) {
  cmd->add_option("--seed", common.seed, "Random seed");
  auto* c = cmd->add_option("--config", common.config, "Key = value configuration file");
  if (config_required) c->required();
  cmd->add_option("--out-dir", common.out_dir, "Output directory")->capture_default_str();
}

fs::path out_path(const CommonOptions& common, const std::string& name) {
  fs::create_directories(common.out_dir);
  return fs::path(common.out_dir) / name;
}

void save_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

bool is_csv(const fs::path& p) { return p.extension() == ".csv"; }
bool is_manifest(const fs::path& p) { return p.extension() == ".manifest"; }

/// Raw (unnormalized) windows from a recording CSV, a dataset manifest or a window file.
std::vector<datapipe::SensorWindow> load_dataset(const fs::path& path, std::size_t window, std::size_t overlap) {
  if (is_manifest(path)) {
    const auto m = datapipe::read_manifest(path);
    const fs::path data = path.parent_path() / m.data_file;
    return datapipe::windows_from_recordings(datapipe::load_csv(data, {}, m.sample_rate_hz), m.window, m.overlap,
                                             m.resample_hz);
  }
  if (is_csv(path)) return datapipe::windows_from_recordings(datapipe::load_csv(path), window, overlap);
  datapipe::WindowSet set = datapipe::load_windows(path);
  if (set.normalized) datapipe::invert_normalization(set.windows, set.stats);
  return std::move(set.windows);
}

TsfConfig load_common_config(const CommonOptions& common) {
  TsfConfig cfg = common.config.empty() ? TsfConfig{} : model_train::load_config(common.config);
  if (common.seed) cfg.seed = *common.seed;
  return cfg;
}

json metrics_json(const model_train::Metrics& m) {
  json per_class = json::array();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto& k = m.per_class[c];
    per_class.push_back(
        {{"class", c}, {"precision", k.precision}, {"recall", k.recall}, {"f1", k.f1}, {"support", k.support}});
  }
  return {{"macro_f1", m.macro_f1},
          {"weighted_f1", m.weighted_f1},
          {"accuracy", m.accuracy},
          {"per_class", per_class},
          {"confusion", m.confusion}};
}

json history_json(const model_train::TrainResult& r) {
  json h = json::array();
  for (const auto& e : r.history)
    h.push_back({{"epoch", e.epoch},
                 {"lr", e.lr},
                 {"tau", e.tau},
                 {"loss", e.loss},
                 {"train_accuracy", e.train_accuracy},
                 {"validation_accuracy", e.validation_accuracy}});
  return h;
}

Table confusion_table(const model_train::Metrics& m) {
  Table t;
  t.header = {"true_class", "predicted_class", "count"};
  for (std::size_t i = 0; i < m.confusion.size(); ++i)
    for (std::size_t j = 0; j < m.confusion[i].size(); ++j)
      t.add_row({std::to_string(i), std::to_string(j), std::to_string(m.confusion[i][j])});
  return t;
}

Table history_table(const model_train::TrainResult& r) {
  Table t;
  t.header = {"epoch", "lr", "tau", "loss", "train_accuracy", "validation_accuracy"};
  for (const auto& e : r.history)
    t.add_row({std::to_string(e.epoch), format_number(e.lr), format_number(e.tau), format_number(e.loss),
               format_number(e.train_accuracy), format_number(e.validation_accuracy)});
  return t;
}

json config_json(const TsfConfig& cfg) {
  std::stringstream ss;
  model_train::write_config(ss, cfg);
  json j = json::object();
  for (const auto& [k, v] : datapipe::read_key_values(ss)) j[k] = v;
  return j;
}

struct LoadedModel {
  model_train::SavedModel saved;
  std::vector<datapipe::SensorWindow> windows;
};

LoadedModel load_model_and_data(const std::string& model_path, const std::string& data_path,
                                const CommonOptions& common) {
  if (!fs::exists(model_path)) throw std::runtime_error("model file not found: " + model_path);
  LoadedModel l{model_train::load_model(model_path), {}};
  std::size_t window = l.saved.model.config().window, overlap = l.saved.model.config().overlap;
  if (!common.config.empty()) {
    const TsfConfig cfg = model_train::load_config(common.config);
    window = cfg.window;
    overlap = cfg.overlap;
  }
  l.windows = load_dataset(data_path, window, overlap);
  if (l.windows.empty()) throw std::runtime_error("dataset has no windows: " + data_path);
  if (l.windows[0].imu_count != l.saved.model.config().imu_count)
    throw std::runtime_error("dataset has " + std::to_string(l.windows[0].imu_count) + " IMUs, model expects " +
                             std::to_string(l.saved.model.config().imu_count));
  return l;
}

json analysis_report(const std::string& kind, json parameters, const std::vector<std::string>& outputs) {
  return {{"kind", kind}, {"parameters", std::move(parameters)}, {"outputs", outputs}};
}

// ---- subcommands ----

struct SynthOptions {
  int subjects = 3;
  std::size_t imus = 1;
  std::size_t windows_per_trial = 25;
  bool gravimeter = false;
};

void cmd_synth(const CommonOptions& common, const SynthOptions& o, std::ostream& out) {
  auto spec = datapipe::default_synthetic_spec();
  spec.subjects = o.subjects;
  spec.imu_count = o.imus;
  spec.windows_per_trial = o.windows_per_trial;
  spec.emit_gravimeter = o.gravimeter;
  spec.validate();
  const auto recordings = datapipe::generate_synthetic(spec, common.seed.value_or(7));
  const fs::path csv = out_path(common, "synthetic.csv");
  datapipe::save_csv(csv, recordings);
  datapipe::DatasetManifest m;
  m.sample_rate_hz = spec.sample_rate_hz;
  m.window = spec.window;
  m.overlap = spec.overlap;
  m.data_file = csv.filename().string();
  datapipe::write_manifest(out_path(common, "synthetic.manifest"), m);
  out << "wrote " << recordings.size() << " recordings to " << csv.string() << '\n';
}

struct PreprocessOptions {
  std::string input;
  std::size_t window = 128;
  std::size_t overlap = 64;
  double sample_rate = 0.0;
  double resample = 0.0;
  bool normalize = false;
};

void cmd_preprocess(const CommonOptions& common, PreprocessOptions o, std::ostream& out) {
  std::vector<datapipe::RawRecording> recordings;
  if (is_manifest(o.input)) {
    const auto m = datapipe::read_manifest(o.input);
    recordings = datapipe::load_csv(fs::path(o.input).parent_path() / m.data_file, {}, m.sample_rate_hz);
    o.window = m.window;
    o.overlap = m.overlap;
    if (o.resample == 0.0) o.resample = m.resample_hz;
  } else {
    recordings = datapipe::load_csv(o.input, {}, o.sample_rate);
  }
  datapipe::WindowSet set;
  set.windows = datapipe::windows_from_recordings(recordings, o.window, o.overlap, o.resample);
  if (set.windows.empty()) throw std::runtime_error("no recording is long enough for one window");
  if (o.normalize) {
    set.stats = datapipe::znormalize(set.windows);
    set.normalized = true;
  }
  const fs::path path = out_path(common, "windows.bin");
  datapipe::save_windows(path, set);
  std::set<int> subjects, classes;
  for (const auto& w : set.windows) {
    subjects.insert(w.subject_id);
    classes.insert(w.label);
  }
  save_json(out_path(common, "preprocess_report.json"),
            {{"recordings", recordings.size()},
             {"windows", set.windows.size()},
             {"window", o.window},
             {"overlap", o.overlap},
             {"resample_hz", o.resample},
             {"subjects", subjects},
             {"classes", classes},
             {"normalized", set.normalized},
             {"output", path.filename().string()}});
  out << "wrote " << set.windows.size() << " windows to " << path.string() << '\n';
}

void cmd_train(const CommonOptions& common, const std::string& data, std::ostream& out) {
  TsfConfig cfg = load_common_config(common);
  const auto windows = load_dataset(data, cfg.window, cfg.overlap);
  auto fitted = model_train::fit_model(cfg, windows, [&](const model_train::EpochLog& e) {
    out << "epoch " << e.epoch << " loss " << format_number(e.loss) << " val_acc "
        << format_number(e.validation_accuracy) << std::endl;
  });
  const fs::path model_path = out_path(common, "model.tsf");
  model_train::save_model(model_path, fitted.model, fitted.normalization);
  save_table(out_path(common, "training_history.csv"), history_table(fitted.training));
  save_json(out_path(common, "train_report.json"),
            {{"config", config_json(fitted.model.config())},
             {"windows", windows.size()},
             {"best_epoch", fitted.training.best_epoch},
             {"best_validation_accuracy", fitted.training.best_validation_accuracy},
             {"flops_per_forward", model_train::count_flops(fitted.model, fitted.model.config().window)},
             {"flop_convention", kFlopConvention},
             {"model", model_path.filename().string()}});
  out << "saved model to " << model_path.string() << '\n';
}

void cmd_eval(const CommonOptions& common, const std::string& model_path, const std::string& data, std::ostream& out) {
  const LoadedModel l = load_model_and_data(model_path, data, common);
  const InferenceRun run = run_inference(l.saved.model, l.saved.normalization, l.windows);
  std::vector<int> truth;
  for (const auto& w : l.windows) truth.push_back(w.label);
  const auto m = model_train::compute_metrics(truth, run.predictions, l.saved.model.config().classes);
  save_table(out_path(common, "confusion.csv"), confusion_table(m));
  save_table(out_path(common, "attention_log.csv"), attention_table(run));
  json report = metrics_json(m);
  report["windows"] = l.windows.size();
  report["flops_per_forward"] = model_train::count_flops(l.saved.model, l.windows[0].length);
  report["flop_convention"] = kFlopConvention;
  save_json(out_path(common, "eval_report.json"), report);
  out << "macro_f1 " << format_number(m.macro_f1) << " weighted_f1 " << format_number(m.weighted_f1) << '\n';
}

void cmd_loso(const CommonOptions& common, const std::string& data, std::size_t kfold, std::ostream& out) {
  const TsfConfig cfg = load_common_config(common);
  const auto windows = load_dataset(data, cfg.window, cfg.overlap);
  json folds = json::array();
  auto on_fold = [&](const model_train::FoldResult& f) {
    const std::string tag = "run" + std::to_string(f.run) + "_fold" + std::to_string(f.fold);
    json j = metrics_json(f.metrics);
    j["run"] = f.run;
    j["fold"] = f.fold;
    j["subject"] = f.subject;
    j["flops_per_forward"] = f.flops_per_forward;
    j["flop_convention"] = kFlopConvention;
    j["runtime_seconds"] = f.runtime_seconds;
    j["train_windows"] = f.train_windows;
    j["test_windows"] = f.test_windows;
    j["best_epoch"] = f.training.best_epoch;
    j["history"] = history_json(f.training);
    j["confusion_csv"] = "confusion_" + tag + ".csv";
    save_table(out_path(common, "confusion_" + tag + ".csv"), confusion_table(f.metrics));
    save_json(out_path(common, "fold_" + tag + ".json"), j);
    folds.push_back(j);
    out << tag << " subject " << f.subject << " macro_f1 " << format_number(f.metrics.macro_f1) << " weighted_f1 "
        << format_number(f.metrics.weighted_f1) << std::endl;
  };
  const auto report = kfold ? model_train::k_fold_cv(cfg, windows, kfold, on_fold)
                            : model_train::loso_cv(cfg, windows, on_fold);
  save_json(out_path(common, kfold ? "kfold_report.json" : "loso_report.json"),
            {{"protocol", kfold ? "k_fold" : "loso"},
             {"config", config_json(model_train::resolve_config(cfg, windows))},
             {"folds", folds},
             {"run_macro_f1", report.run_macro_f1},
             {"run_weighted_f1", report.run_weighted_f1},
             {"mean_macro_f1", report.mean_macro_f1},
             {"std_macro_f1", report.std_macro_f1},
             {"mean_weighted_f1", report.mean_weighted_f1},
             {"std_weighted_f1", report.std_weighted_f1},
             {"note", report.note}});
  out << "mean macro_f1 " << format_number(report.mean_macro_f1) << " +- " << format_number(report.std_macro_f1)
      << '\n';
}

void cmd_noise(const CommonOptions& common, const std::string& model_path, const std::string& data,
               const std::vector<double>& levels, std::ostream& out) {
  const LoadedModel l = load_model_and_data(model_path, data, common);
  NoiseStudyOptions o;
  o.levels = levels;
  o.seed = common.seed.value_or(1);
  const auto rows = noise_study(l.saved.model, l.saved.normalization, l.windows, o);
  save_table(out_path(common, "noise_attention.csv"), noise_table(rows));
  save_json(out_path(common, "noise_report.json"),
            analysis_report("noise_attention",
                            {{"levels", levels},
                             {"level_unit", l.saved.normalization ? "normalization std" : "raw"},
                             {"seed", o.seed},
                             {"windows", l.windows.size()}},
                            {"noise_attention.csv"}));
  out << "wrote " << rows.size() << " rows\n";
}

void cmd_edges(const CommonOptions& common, const std::string& model_path, const std::string& data,
               const std::vector<int>& activities, std::size_t bins, std::ostream& out) {
  const LoadedModel l = load_model_and_data(model_path, data, common);
  const std::set<int> filter(activities.begin(), activities.end());
  const auto edges = collect_edges(l.saved.model, l.saved.normalization, l.windows, filter);
  save_table(out_path(common, "edges.csv"), edge_table(edges));
  save_table(out_path(common, "edge_histograms.csv"), histogram_table(edge_histograms(edges, bins)));
  save_json(out_path(common, "edge_report.json"),
            analysis_report("edge_histograms", {{"activities", activities}, {"bins", bins}, {"edges", edges.size()}},
                            {"edges.csv", "edge_histograms.csv"}));
  out << "collected " << edges.size() << " edges\n";
}

void cmd_routes(const CommonOptions& common, const std::string& model_path, const std::string& data,
                const std::string& channel, std::ostream& out) {
  const LoadedModel l = load_model_and_data(model_path, data, common);
  const ChannelRef ch = parse_channel(channel);
  const auto routes = infer_routes(l.saved.model, l.saved.normalization, l.windows);
  const auto spectra = route_spectra(l.windows, routes, ch);
  save_table(out_path(common, "route_spectra.csv"), route_spectra_table(spectra));
  save_table(out_path(common, "routes.csv"), route_dump_table(routes));
  json counts = json::object();
  for (const auto& s : spectra) counts[s.route] = s.sample_count;
  save_json(out_path(common, "route_report.json"),
            analysis_report("route_spectra", {{"channel", channel}, {"route_counts", counts}},
                            {"route_spectra.csv", "routes.csv"}));
  out << "grouped " << routes.size() << " windows into " << spectra.size() << " routes\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal-spatial fusion HAR toolkit", "tsf"};
  app.require_subcommand(1);

  CommonOptions common;
  SynthOptions synth;
  PreprocessOptions prep;
  std::string data, model_path, channel = "lacc:0:0";
  std::vector<double> levels{0.0, 0.5, 1.0, 2.0};
  std::vector<int> activities;
  std::size_t bins = 20, kfold = 0;

  auto* s = app.add_subcommand("synth", "Generate the synthetic multi-subject recording set");
  add_common(s, common, false);
  s->add_option("--subjects", synth.subjects, "Subject count")->capture_default_str();
  s->add_option("--imus", synth.imus, "IMUs per recording")->capture_default_str();
  s->add_option("--windows-per-trial", synth.windows_per_trial, "Windows per trial")->capture_default_str();
  s->add_flag("--gravimeter", synth.gravimeter, "Emit gravimeter columns");

  auto* p = app.add_subcommand("preprocess", "Segment a recording CSV or manifest into a window file");
  add_common(p, common, false);
  p->add_option("--input", prep.input, "Recording CSV or .manifest")->required();
  p->add_option("--window", prep.window, "Window length")->capture_default_str();
  p->add_option("--overlap", prep.overlap, "Window overlap")->capture_default_str();
  p->add_option("--sample-rate", prep.sample_rate, "Sample rate in Hz (0 infers from timestamps)");
  p->add_option("--resample-hz", prep.resample, "Resample to this rate (0 keeps the native rate)");
  p->add_flag("--normalize", prep.normalize, "Store z-normalized windows");

  auto* t = app.add_subcommand("train", "Train on a dataset and save the model");
  add_common(t, common, true);
  t->add_option("--data", data, "Window file, recording CSV or .manifest")->required();

  auto* e = app.add_subcommand("eval", "Evaluate a saved model");
  add_common(e, common, false);
  e->add_option("--model", model_path, "Saved model")->required();
  e->add_option("--data", data, "Window file, recording CSV or .manifest")->required();

  auto* l = app.add_subcommand("loso", "Leave-one-subject-out cross-validation");
  add_common(l, common, true);
  l->add_option("--data", data, "Window file, recording CSV or .manifest")->required();
  l->add_option("--kfold", kfold, "Run shuffled k-fold cross-validation instead");

  auto* n = app.add_subcommand("analyze-noise", "Sensor attention and WF1 under injected noise");
  add_common(n, common, false);
  n->add_option("--model", model_path, "Saved model")->required();
  n->add_option("--data", data, "Window file, recording CSV or .manifest")->required();
  n->add_option("--levels", levels, "Noise RMS levels in units of the sensor std")->delimiter(',')->capture_default_str();

  auto* g = app.add_subcommand("analyze-edges", "Intra/inter edge weight histograms");
  add_common(g, common, false);
  g->add_option("--model", model_path, "Saved model")->required();
  g->add_option("--data", data, "Window file, recording CSV or .manifest")->required();
  g->add_option("--activity", activities, "Restrict to these activity labels")->delimiter(',');
  g->add_option("--bins", bins, "Histogram bins over [-1, 1]")->capture_default_str();

  auto* r = app.add_subcommand("analyze-routes", "Average input spectra per wavelet route");
  add_common(r, common, false);
  r->add_option("--model", model_path, "Saved model")->required();
  r->add_option("--data", data, "Window file, recording CSV or .manifest")->required();
  r->add_option("--channel", channel, "Input channel kind[:axis[:imu]], kind in grav, gyro, lacc")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    const auto subs = app.get_subcommands();
    err << "error: usage: " << ex.what() << '\n' << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (s->parsed()) cmd_synth(common, synth, out);
    else if (p->parsed()) cmd_preprocess(common, prep, out);
    else if (t->parsed()) cmd_train(common, data, out);
    else if (e->parsed()) cmd_eval(common, model_path, data, out);
    else if (l->parsed()) cmd_loso(common, data, kfold, out);
    else if (n->parsed()) cmd_noise(common, model_path, data, levels, out);
    else if (g->parsed()) cmd_edges(common, model_path, data, activities, bins, out);
    else if (r->parsed()) cmd_routes(common, model_path, data, channel, out);
  } catch (const std::exception& ex) {
    std::string msg = ex.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    err << "error: " << msg << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace tsf::cli_analysis
