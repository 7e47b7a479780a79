#include "tsf/model_train/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#include "tsf/numerics/flops.hpp"
#include "tsf/numerics/ops.hpp"

namespace tsf::model_train {

using numerics::NoGradGuard;
using numerics::Rng;

namespace {

enum Purpose : std::uint64_t { kShuffle = 1, kMixup = 2, kGumbel = 3, kSplit = 4, kInit = 5, kFolds = 6 };

std::vector<int> labels_of(const std::vector<SensorWindow>& windows) {
  std::vector<int> y(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) y[i] = windows[i].label;
  return y;
}

std::vector<SensorWindow> gather(const std::vector<SensorWindow>& windows, const std::vector<std::size_t>& idx) {
  std::vector<SensorWindow> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(windows.at(i));
  return out;
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) ok += truth[i] == pred[i];
  return static_cast<double>(ok) / static_cast<double>(truth.size());
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

Rng derive_rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(b)};
  return Rng(seq);
}

double learning_rate(const TsfConfig& config, std::size_t epoch) {
  return config.lr / std::pow(2.0, static_cast<double>(epoch / config.lr_halving_epochs));
}

double temperature(const TsfConfig& config, std::size_t epoch) {
  if (config.epochs <= 1) return config.tau_start;
  const double f = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
  return config.tau_start + (config.tau_end - config.tau_start) * std::min(f, 1.0);
}

MixupBatch mixup(const std::vector<double>& x, const std::vector<double>& y, std::size_t batch,
                 double lambda, const std::vector<std::size_t>& perm) {
  if (batch == 0 || x.size() % batch || y.size() % batch || perm.size() != batch) {
    throw numerics::DimensionError("mixup: inconsistent batch layout");
  }
  const std::size_t xr = x.size() / batch, yr = y.size() / batch;
  MixupBatch out{std::vector<double>(x.size()), std::vector<double>(y.size()), lambda};
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t j = perm[i];
    for (std::size_t k = 0; k < xr; ++k) out.x[i * xr + k] = lambda * x[i * xr + k] + (1.0 - lambda) * x[j * xr + k];
    for (std::size_t k = 0; k < yr; ++k) out.y[i * yr + k] = lambda * y[i * yr + k] + (1.0 - lambda) * y[j * yr + k];
  }
  return out;
}

MixupBatch mixup(const std::vector<double>& x, const std::vector<double>& y, std::size_t batch,
                 double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw numerics::ContractError("mixup: alpha must be positive");
  std::gamma_distribution<double> g(alpha, 1.0);
  const double a = g(rng), b = g(rng);
  const double lambda = (a + b) > 0.0 ? a / (a + b) : 0.5;
  std::vector<std::size_t> perm(batch);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return mixup(x, y, batch, lambda, perm);
}

std::vector<double> one_hot(const std::vector<int>& labels, std::size_t classes) {
  std::vector<double> y(labels.size() * classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw numerics::DimensionError("one_hot: label " + std::to_string(labels[i]) + " out of range");
    }
    y[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return y;
}

Split stratified_split(const std::vector<int>& labels, double fraction, Rng& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Split s;
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    const std::size_t take = std::min(n_val, idx.size() > 1 ? idx.size() - 1 : std::size_t{0});
    s.validation.insert(s.validation.end(), idx.begin(), idx.begin() + static_cast<long>(take));
    s.train.insert(s.train.end(), idx.begin() + static_cast<long>(take), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

std::vector<int> predict(const TsfModel& model, const std::vector<SensorWindow>& windows,
                         std::vector<ForwardResult>* diagnostics, std::size_t batch_size) {
  NoGradGuard no_grad;
  std::vector<int> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(windows.size(), start + batch_size); ++i) idx.push_back(i);
    ForwardResult r = model.forward(stack_windows(windows, idx));
    const std::size_t classes = r.logits.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c)
        if (r.logits[b * classes + c] > r.logits[b * classes + best]) best = c;
      out.push_back(static_cast<int>(best));
    }
    if (diagnostics) diagnostics->push_back(std::move(r));
  }
  return out;
}

Metrics evaluate(const TsfModel& model, const std::vector<SensorWindow>& test_set) {
  if (test_set.empty()) throw std::invalid_argument("evaluate: empty test set");
  return compute_metrics(labels_of(test_set), predict(model, test_set), model.config().classes);
}

double count_flops(const TsfModel& model, std::size_t window) {
  NoGradGuard no_grad;
  numerics::FlopCounter counter;
  model.forward(Tensor::zeros({1, model.config().imu_count, datapipe::kSensorKinds * 3, window}));
  return counter.total();
}

TrainResult train(TsfModel& model, const std::vector<SensorWindow>& train_set,
                  const std::vector<SensorWindow>& validation_set, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const TsfConfig& cfg = model.config();
  Rng shuffle_rng = derive_rng(cfg.seed, kShuffle);
  Rng mixup_rng = derive_rng(cfg.seed, kMixup);
  Rng gumbel_rng = derive_rng(cfg.seed, kGumbel);
  numerics::ParameterList params = model.parameters();
  const std::vector<int> train_labels = labels_of(train_set);
  const std::vector<int> val_labels = labels_of(validation_set);

  TrainResult result;
  std::vector<std::vector<double>> best;
  double best_score = -1.0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.lr = learning_rate(cfg, epoch);
    log.tau = temperature(cfg, epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                         order.begin() + static_cast<long>(end));
      const std::size_t b = idx.size();
      Tensor x = stack_windows(train_set, idx);
      std::vector<int> yb(b);
      for (std::size_t i = 0; i < b; ++i) yb[i] = train_labels[idx[i]];
      std::vector<double> y = one_hot(yb, cfg.classes);
      if (cfg.mixup_alpha > 0.0 && b > 1) {
        MixupBatch m = mixup({x.values().begin(), x.values().end()}, y, b, cfg.mixup_alpha, mixup_rng);
        x = Tensor(x.shape(), std::move(m.x));
        y = std::move(m.y);
      }
      numerics::zero_grad(params);
      const ForwardResult r = model.forward(x, {Mode::kTrain, log.tau, &gumbel_rng});
      const Tensor loss = numerics::cross_entropy(r.logits, Tensor({b, cfg.classes}, y));
      numerics::backward(loss);
      numerics::adam_step(params, log.lr);
      loss_sum += loss.item() * static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) {
        std::size_t best_c = 0;
        for (std::size_t c = 1; c < cfg.classes; ++c)
          if (r.logits[i * cfg.classes + c] > r.logits[i * cfg.classes + best_c]) best_c = c;
        correct += static_cast<int>(best_c) == yb[i];
      }
    }
    numerics::zero_grad(params);
    log.loss = loss_sum / static_cast<double>(order.size());
    log.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    log.validation_accuracy = validation_set.empty() ? log.train_accuracy
                                                     : accuracy(val_labels, predict(model, validation_set));
    if (log.validation_accuracy >= best_score) {
      best_score = log.validation_accuracy;
      result.best_epoch = epoch;
      best.clear();
      for (const numerics::Parameter* p : params) best.emplace_back(p->tensor.values().begin(), p->tensor.values().end());
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto v = params[i]->tensor.values_mut();
    std::copy(best[i].begin(), best[i].end(), v.begin());
  }
  result.best_validation_accuracy = best_score;
  return result;
}

TsfConfig resolve_config(TsfConfig config, const std::vector<SensorWindow>& windows) {
  if (windows.empty()) throw std::invalid_argument("no windows to train on");
  int max_label = 0;
  for (const SensorWindow& w : windows) {
    if (w.label < 0) throw std::invalid_argument("negative activity label " + std::to_string(w.label));
    max_label = std::max(max_label, w.label);
  }
  const std::size_t needed = static_cast<std::size_t>(max_label) + 1;
  if (config.classes == 0) config.classes = std::max<std::size_t>(needed, 2);
  if (config.classes < needed) {
    throw ConfigError("config: classes = " + std::to_string(config.classes) + " but label " +
                      std::to_string(max_label) + " occurs");
  }
  if (config.imu_count == 0) config.imu_count = windows[0].imu_count;
  if (config.imu_count != windows[0].imu_count) {
    throw ConfigError("config: imu_count = " + std::to_string(config.imu_count) + " but the data has " +
                      std::to_string(windows[0].imu_count));
  }
  config.window = windows[0].length;
  config.validate();
  return config;
}

FoldResult run_fold(const TsfConfig& config, const std::vector<SensorWindow>& windows,
                    const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& test_idx,
                    std::size_t run, std::size_t fold, TsfModel* trained, datapipe::NormStats* stats,
                    const EpochCallback& on_epoch) {
  const auto t0 = std::chrono::steady_clock::now();
  if (train_idx.empty()) throw std::invalid_argument("fold " + std::to_string(fold) + ": empty training split");
  if (test_idx.empty()) throw std::invalid_argument("fold " + std::to_string(fold) + ": empty test split");
  TsfConfig cfg = config;
  cfg.seed = config.seed + 1000003ULL * run + 7919ULL * fold;

  std::vector<SensorWindow> pool = gather(windows, train_idx);
  std::vector<SensorWindow> test = gather(windows, test_idx);
  const datapipe::NormStats norm = datapipe::fit_normalization(pool);
  datapipe::apply_normalization(pool, norm);
  datapipe::apply_normalization(test, norm);
  Rng split_rng = derive_rng(cfg.seed, kSplit);
  const Split split = stratified_split(labels_of(pool), cfg.validation_fraction, split_rng);

  TsfModel model(cfg);
  FoldResult r;
  r.run = run;
  r.fold = fold;
  r.train_windows = split.train.size();
  r.test_windows = test.size();
  r.training = train(model, gather(pool, split.train), gather(pool, split.validation), on_epoch);
  r.metrics = evaluate(model, test);
  r.flops_per_forward = count_flops(model, cfg.window);
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (trained) *trained = std::move(model);
  if (stats) *stats = norm;
  return r;
}

FittedModel fit_model(const TsfConfig& config, const std::vector<SensorWindow>& windows,
                      const EpochCallback& on_epoch) {
  const TsfConfig cfg = resolve_config(config, windows);
  std::vector<SensorWindow> pool = windows;
  FittedModel f{TsfModel(cfg), datapipe::fit_normalization(pool), {}};
  datapipe::apply_normalization(pool, f.normalization);
  Rng split_rng = derive_rng(cfg.seed, kSplit);
  const Split split = stratified_split(labels_of(pool), cfg.validation_fraction, split_rng);
  f.training = train(f.model, gather(pool, split.train), gather(pool, split.validation), on_epoch);
  return f;
}

std::vector<std::pair<int, std::vector<std::size_t>>> subject_folds(const std::vector<SensorWindow>& windows) {
  std::map<int, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < windows.size(); ++i) by_subject[windows[i].subject_id].push_back(i);
  return {by_subject.begin(), by_subject.end()};
}

void summarize(CvReport& report, std::size_t runs) {
  report.run_macro_f1.assign(runs, 0.0);
  report.run_weighted_f1.assign(runs, 0.0);
  std::vector<std::size_t> counts(runs, 0);
  for (const FoldResult& f : report.folds) {
    report.run_macro_f1[f.run] += f.metrics.macro_f1;
    report.run_weighted_f1[f.run] += f.metrics.weighted_f1;
    ++counts[f.run];
  }
  for (std::size_t r = 0; r < runs; ++r) {
    if (counts[r]) {
      report.run_macro_f1[r] /= static_cast<double>(counts[r]);
      report.run_weighted_f1[r] /= static_cast<double>(counts[r]);
    }
  }
  report.mean_macro_f1 = mean(report.run_macro_f1);
  report.std_macro_f1 = stddev(report.run_macro_f1);
  report.mean_weighted_f1 = mean(report.run_weighted_f1);
  report.std_weighted_f1 = stddev(report.run_weighted_f1);
}

CvReport loso_cv(const TsfConfig& config, const std::vector<SensorWindow>& windows, const FoldCallback& on_fold) {
  const TsfConfig cfg = resolve_config(config, windows);
  const auto folds = subject_folds(windows);
  CvReport report;
  if (folds.size() < 2) {
    report.note = "single subject: stratified 80/20 train/test split instead of LOSO";
    std::cerr << "warning: " << report.note << '\n';
    for (std::size_t run = 0; run < cfg.runs; ++run) {
      Rng rng = derive_rng(cfg.seed, kFolds, run);
      std::vector<int> labels = labels_of(windows);
      const Split s = stratified_split(labels, 0.2, rng);
      FoldResult f = run_fold(cfg, windows, s.train, s.validation, run, 0);
      f.subject = folds.empty() ? -1 : folds[0].first;
      if (on_fold) on_fold(f);
      report.folds.push_back(std::move(f));
    }
    summarize(report, cfg.runs);
    return report;
  }
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    for (std::size_t k = 0; k < folds.size(); ++k) {
      std::vector<std::size_t> train_idx;
      for (std::size_t j = 0; j < folds.size(); ++j)
        if (j != k) train_idx.insert(train_idx.end(), folds[j].second.begin(), folds[j].second.end());
      std::sort(train_idx.begin(), train_idx.end());
      FoldResult f = run_fold(cfg, windows, train_idx, folds[k].second, run, k);
      f.subject = folds[k].first;
      if (on_fold) on_fold(f);
      report.folds.push_back(std::move(f));
    }
  }
  summarize(report, cfg.runs);
  return report;
}

CvReport k_fold_cv(const TsfConfig& config, const std::vector<SensorWindow>& windows, std::size_t k,
                   const FoldCallback& on_fold) {
  const TsfConfig cfg = resolve_config(config, windows);
  if (k < 2 || k > windows.size()) throw std::invalid_argument("k_fold_cv: need 2 <= k <= window count");
  CvReport report;
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    Rng rng = derive_rng(cfg.seed, kFolds, run, k);
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<std::size_t> train_idx, test_idx;
      for (std::size_t i = 0; i < order.size(); ++i) (i % k == f ? test_idx : train_idx).push_back(order[i]);
      std::sort(train_idx.begin(), train_idx.end());
      std::sort(test_idx.begin(), test_idx.end());
      FoldResult r = run_fold(cfg, windows, train_idx, test_idx, run, f);
      if (on_fold) on_fold(r);
      report.folds.push_back(std::move(r));
    }
  }
  summarize(report, cfg.runs);
  return report;
}

}  // namespace tsf::model_train
