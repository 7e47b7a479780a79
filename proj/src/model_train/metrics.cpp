#include "tsf/model_train/metrics.hpp"

#include <stdexcept>
#include <string>

namespace tsf::model_train {

Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& predicted,
                        std::size_t classes) {
  if (truth.empty()) throw std::invalid_argument("metrics: empty evaluation set");
  if (truth.size() != predicted.size()) throw std::invalid_argument("metrics: label count mismatch");
  Metrics m;
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= classes ||
        static_cast<std::size_t>(predicted[i]) >= classes) {
      throw std::invalid_argument("metrics: label out of range at index " + std::to_string(i));
    }
    ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  m.per_class.resize(classes);
  std::size_t correct = 0, present = 0;
  double f1_sum = 0.0, weighted = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = m.confusion[c][c], row = 0, col = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      row += m.confusion[c][k];
      col += m.confusion[k][c];
    }
    ClassMetrics& cm = m.per_class[c];
    cm.support = row;
    cm.precision = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    cm.recall = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    cm.f1 = (row + col) ? 2.0 * static_cast<double>(tp) / static_cast<double>(row + col) : 0.0;
    correct += tp;
    if (row) {
      ++present;
      f1_sum += cm.f1;
      weighted += cm.f1 * static_cast<double>(row);
    }
  }
  const double n = static_cast<double>(truth.size());
  m.macro_f1 = f1_sum / static_cast<double>(present);
  m.weighted_f1 = weighted / n;
  m.accuracy = static_cast<double>(correct) / n;
  return m;
}

}  // namespace tsf::model_train
