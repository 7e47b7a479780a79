#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "tsf/graph_fusion/graph.hpp"
#include "tsf/temporal_fusion/pipeline.hpp"

namespace tsf::model_train {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TsfConfig {
  // Architecture.
  std::size_t cconv_channels = 64;
  std::size_t projection_channels = 96;
  /// Width of local fusion, graph aggregation and self-attention.
  std::size_t temporal_channels = 128;
  std::size_t grav_width = 11;
  std::size_t gyro_width = 10;
  std::size_t lacc_width = 11;
  std::size_t local_width = 5;
  std::size_t graph_layers = 2;
  std::size_t attention_layers = 2;
  std::size_t attention_heads = 4;
  std::size_t ff_hidden = 256;

  // Data.
  std::size_t window = 128;
  std::size_t overlap = 64;
  /// 0 infers from the data.
  std::size_t classes = 0;
  std::size_t imu_count = 0;

  // Training protocol.
  double lr = 0.0005;
  std::size_t lr_halving_epochs = 5;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double mixup_alpha = 0.2;
  double tau_start = 1.0;
  double tau_end = 0.5;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  std::size_t runs = 3;

  // Ablation switches.
  bool imu_fusion = true;
  bool sensor_attention = true;
  graph_fusion::GraphMode graph_mode = graph_fusion::GraphMode::kDynamic;
  temporal_fusion::TemporalReduction temporal_reduction = temporal_fusion::TemporalReduction::kWavelet;
  temporal_fusion::RoutePolicy route_policy = temporal_fusion::RoutePolicy::kAdaptive;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Reads `key = value` lines; unspecified keys keep their defaults. Unknown
/// keys and malformed values raise ConfigError.
TsfConfig read_config(std::istream& in);
TsfConfig load_config(const std::filesystem::path& path);
/// Writes every key with a one-line description.
void write_config(std::ostream& out, const TsfConfig& config);
void save_config(const std::filesystem::path& path, const TsfConfig& config);

/// Applies one `key = value` assignment.
void set_config_value(TsfConfig& config, const std::string& key, const std::string& value);

std::string to_string(graph_fusion::GraphMode mode);
std::string to_string(temporal_fusion::TemporalReduction reduction);
std::string to_string(temporal_fusion::RoutePolicy policy);

}  // namespace tsf::model_train
