#pragma once

#include <vector>

namespace tsf::model_train {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  std::vector<ClassMetrics> per_class;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  /// Unweighted mean of F1 over classes with non-zero support.
  double macro_f1 = 0.0;
  /// Support-weighted mean of F1.
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
};

/// Labels must lie in [0, classes). Throws std::invalid_argument on empty or
/// mismatched inputs. A class with no true and no predicted positives has F1 = 0.
Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& predicted,
                        std::size_t classes);

}  // namespace tsf::model_train
