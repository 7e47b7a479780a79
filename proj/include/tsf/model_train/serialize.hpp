#pragma once

#include <filesystem>
#include <optional>

#include "tsf/datapipe/preprocess.hpp"
#include "tsf/model_train/model.hpp"

namespace tsf::model_train {

struct SavedModel {
  TsfModel model;
  std::optional<datapipe::NormStats> normalization;
};

/// Magic line, one-line JSON header (config, normalization, parameter names and
/// shapes) and the parameter values as raw little-endian doubles.
void save_model(const std::filesystem::path& path, TsfModel& model,
                const std::optional<datapipe::NormStats>& normalization = std::nullopt);
/// Throws std::runtime_error on a malformed or mismatched file.
SavedModel load_model(const std::filesystem::path& path);

}  // namespace tsf::model_train
