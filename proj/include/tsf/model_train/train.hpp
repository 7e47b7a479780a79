#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tsf/datapipe/preprocess.hpp"
#include "tsf/model_train/metrics.hpp"
#include "tsf/model_train/model.hpp"

namespace tsf::model_train {

using datapipe::SensorWindow;

/// Random stream for a (seed, purpose, a, b) tuple.
numerics::Rng derive_rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t a = 0,
                         std::uint64_t b = 0);

/// lr0 / 2^floor(epoch / period), epochs counted from 0.
double learning_rate(const TsfConfig& config, std::size_t epoch);
/// Linear from tau_start at epoch 0 to tau_end at the last epoch.
double temperature(const TsfConfig& config, std::size_t epoch);

struct MixupBatch {
  std::vector<double> x;
  std::vector<double> y;
  double lambda = 1.0;
};

/// mixed = λ x_i + (1 - λ) x_perm(i) for rows of width `x_row` and `y_row`.
MixupBatch mixup(const std::vector<double>& x, const std::vector<double>& y, std::size_t batch,
                 double lambda, const std::vector<std::size_t>& perm);
/// λ ~ Beta(α, α) and a uniform permutation of the batch.
MixupBatch mixup(const std::vector<double>& x, const std::vector<double>& y, std::size_t batch,
                 double alpha, numerics::Rng& rng);

std::vector<double> one_hot(const std::vector<int>& labels, std::size_t classes);

/// Per-class split: round(fraction * n_c) windows of every class go to validation.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
Split stratified_split(const std::vector<int>& labels, double fraction, numerics::Rng& rng);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double tau = 0.0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
  double best_validation_accuracy = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam with halving schedule, annealed temperature, optional mixup; restores
/// the parameters of the last epoch reaching the best validation accuracy (training
/// accuracy when the validation set is empty). Throws on an empty training set.
TrainResult train(TsfModel& model, const std::vector<SensorWindow>& train_set,
                  const std::vector<SensorWindow>& validation_set, const EpochCallback& on_epoch = {});

/// Argmax labels from inference in batches; per-batch diagnostics are appended
/// to `diagnostics` when given.
std::vector<int> predict(const TsfModel& model, const std::vector<SensorWindow>& windows,
                         std::vector<ForwardResult>* diagnostics = nullptr,
                         std::size_t batch_size = 128);

Metrics evaluate(const TsfModel& model, const std::vector<SensorWindow>& test_set);

/// FLOPs of one inference forward pass on a single window.
double count_flops(const TsfModel& model, std::size_t window);

struct FoldResult {
  std::size_t run = 0;
  std::size_t fold = 0;
  /// Held-out subject for LOSO folds, -1 otherwise.
  int subject = -1;
  Metrics metrics;
  TrainResult training;
  double flops_per_forward = 0.0;
  double runtime_seconds = 0.0;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
};

struct CvReport {
  std::vector<FoldResult> folds;
  /// Mean over the folds of each run.
  std::vector<double> run_macro_f1;
  std::vector<double> run_weighted_f1;
  double mean_macro_f1 = 0.0;
  double std_macro_f1 = 0.0;
  double mean_weighted_f1 = 0.0;
  double std_weighted_f1 = 0.0;
  std::string note;
};

using FoldCallback = std::function<void(const FoldResult&)>;

/// Completes `config` (classes, imu_count, window) from the data.
TsfConfig resolve_config(TsfConfig config, const std::vector<SensorWindow>& windows);

/// Trains on `train_idx` (with a stratified validation share) after fitting the
/// normalization on it, then evaluates on `test_idx`.
FoldResult run_fold(const TsfConfig& config, const std::vector<SensorWindow>& windows,
                    const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& test_idx,
                    std::size_t run, std::size_t fold, TsfModel* trained = nullptr,
                    datapipe::NormStats* stats = nullptr, const EpochCallback& on_epoch = {});

struct FittedModel {
  TsfModel model;
  datapipe::NormStats normalization;
  TrainResult training;
};

/// Resolves the config from the data, fits the normalization on all windows and
/// trains with a stratified validation share.
FittedModel fit_model(const TsfConfig& config, const std::vector<SensorWindow>& windows,
                      const EpochCallback& on_epoch = {});

/// One fold per subject, repeated `config.runs` times. A single-subject dataset
/// falls back to a stratified 80/20 split (recorded in `note`).
CvReport loso_cv(const TsfConfig& config, const std::vector<SensorWindow>& windows,
                 const FoldCallback& on_fold = {});

/// Shuffled k folds, repeated `config.runs` times.
CvReport k_fold_cv(const TsfConfig& config, const std::vector<SensorWindow>& windows, std::size_t k = 10,
                   const FoldCallback& on_fold = {});

/// Subject-wise fold assignment: fold i tests on the i-th smallest subject id.
std::vector<std::pair<int, std::vector<std::size_t>>> subject_folds(const std::vector<SensorWindow>& windows);

void summarize(CvReport& report, std::size_t runs);

}  // namespace tsf::model_train
