#include "tsf/model_train/config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <vector>

#include "tsf/datapipe/io.hpp"

namespace tsf::model_train {

using graph_fusion::GraphMode;
using temporal_fusion::RoutePolicy;
using temporal_fusion::TemporalReduction;

namespace {

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || x < 0) throw ConfigError("config: " + key + " expects a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size()) throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config: " + key + " expects true or false, got '" + v + "'");
}

struct Field {
  std::string key;
  std::string help;
  std::function<void(TsfConfig&, const std::string&)> set;
  std::function<std::string(const TsfConfig&)> get;
};

std::string fmt(double v) { return datapipe::format_number(v); }

#define TSF_SIZE_FIELD(name, help)                                                          \
  Field {                                                                                  \
    #name, help, [](TsfConfig& c, const std::string& v) { c.name = parse_size(#name, v); }, \
        [](const TsfConfig& c) { return std::to_string(c.name); }                          \
  }
#define TSF_DOUBLE_FIELD(name, help)                                                          \
  Field {                                                                                    \
    #name, help, [](TsfConfig& c, const std::string& v) { c.name = parse_double(#name, v); }, \
        [](const TsfConfig& c) { return fmt(c.name); }                                       \
  }
#define TSF_BOOL_FIELD(name, help)                                                          \
  Field {                                                                                  \
    #name, help, [](TsfConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }, \
        [](const TsfConfig& c) { return std::string(c.name ? "true" : "false"); }          \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      TSF_SIZE_FIELD(cconv_channels, "channels of each causal sensor convolution"),
      TSF_SIZE_FIELD(projection_channels, "per-node modality projection width"),
      TSF_SIZE_FIELD(temporal_channels, "local fusion, graph aggregation and attention width"),
      TSF_SIZE_FIELD(grav_width, "gravity causal kernel width"),
      TSF_SIZE_FIELD(gyro_width, "gyroscope causal kernel width"),
      TSF_SIZE_FIELD(lacc_width, "linear acceleration causal kernel width"),
      TSF_SIZE_FIELD(local_width, "local fusion kernel width"),
      TSF_SIZE_FIELD(graph_layers, "adaptive graph filter layers"),
      TSF_SIZE_FIELD(attention_layers, "self-attention blocks (fixed at 2)"),
      TSF_SIZE_FIELD(attention_heads, "attention heads"),
      TSF_SIZE_FIELD(ff_hidden, "feed-forward hidden width"),
      TSF_SIZE_FIELD(window, "window length in samples"),
      TSF_SIZE_FIELD(overlap, "window overlap in samples"),
      TSF_SIZE_FIELD(classes, "class count, 0 = infer from labels"),
      TSF_SIZE_FIELD(imu_count, "IMU positions, 0 = infer from data"),
      TSF_DOUBLE_FIELD(lr, "initial Adam learning rate"),
      TSF_SIZE_FIELD(lr_halving_epochs, "epochs between learning-rate halvings"),
      TSF_SIZE_FIELD(epochs, "training epochs"),
      TSF_SIZE_FIELD(batch_size, "mini-batch size"),
      TSF_DOUBLE_FIELD(mixup_alpha, "mixup Beta(a, a) parameter, 0 disables mixup"),
      TSF_DOUBLE_FIELD(tau_start, "Gumbel temperature at the first epoch"),
      TSF_DOUBLE_FIELD(tau_end, "Gumbel temperature at the last epoch"),
      TSF_DOUBLE_FIELD(validation_fraction, "stratified validation share of the training data"),
      Field{"seed", "root seed for every random stream",
            [](TsfConfig& c, const std::string& v) { c.seed = parse_size("seed", v); },
            [](const TsfConfig& c) { return std::to_string(c.seed); }},
      TSF_SIZE_FIELD(runs, "repeated cross-validation runs"),
      TSF_BOOL_FIELD(imu_fusion, "causal IMU fusion block; false uses plain convolutions"),
      TSF_BOOL_FIELD(sensor_attention, "posture sensor attention; false sums the branches"),
      Field{"graph_mode", "dynamic | static | off",
            [](TsfConfig& c, const std::string& v) {
              if (v == "dynamic") c.graph_mode = GraphMode::kDynamic;
              else if (v == "static") c.graph_mode = GraphMode::kStatic;
              else if (v == "off") c.graph_mode = GraphMode::kOff;
              else throw ConfigError("config: graph_mode expects dynamic, static or off, got '" + v + "'");
            },
            [](const TsfConfig& c) { return to_string(c.graph_mode); }},
      Field{"temporal_reduction", "wavelet | pooling | none",
            [](TsfConfig& c, const std::string& v) {
              if (v == "wavelet") c.temporal_reduction = TemporalReduction::kWavelet;
              else if (v == "pooling") c.temporal_reduction = TemporalReduction::kPooling;
              else if (v == "none") c.temporal_reduction = TemporalReduction::kNone;
              else throw ConfigError("config: temporal_reduction expects wavelet, pooling or none, got '" + v + "'");
            },
            [](const TsfConfig& c) { return to_string(c.temporal_reduction); }},
      Field{"route_policy", "adaptive | force_low | force_high",
            [](TsfConfig& c, const std::string& v) {
              if (v == "adaptive") c.route_policy = RoutePolicy::kAdaptive;
              else if (v == "force_low") c.route_policy = RoutePolicy::kForceLow;
              else if (v == "force_high") c.route_policy = RoutePolicy::kForceHigh;
              else throw ConfigError("config: route_policy expects adaptive, force_low or force_high, got '" + v + "'");
            },
            [](const TsfConfig& c) { return to_string(c.route_policy); }},
  };
  return all;
}

#undef TSF_SIZE_FIELD
#undef TSF_DOUBLE_FIELD
#undef TSF_BOOL_FIELD

}  // namespace

std::string to_string(GraphMode mode) {
  switch (mode) {
    case GraphMode::kDynamic: return "dynamic";
    case GraphMode::kStatic: return "static";
    case GraphMode::kOff: return "off";
  }
  return "dynamic";
}

std::string to_string(TemporalReduction r) {
  switch (r) {
    case TemporalReduction::kWavelet: return "wavelet";
    case TemporalReduction::kPooling: return "pooling";
    case TemporalReduction::kNone: return "none";
  }
  return "wavelet";
}

std::string to_string(RoutePolicy p) {
  switch (p) {
    case RoutePolicy::kAdaptive: return "adaptive";
    case RoutePolicy::kForceLow: return "force_low";
    case RoutePolicy::kForceHigh: return "force_high";
  }
  return "adaptive";
}

void TsfConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("config: ") + name + " must be positive");
  };
  positive(cconv_channels, "cconv_channels");
  positive(projection_channels, "projection_channels");
  positive(temporal_channels, "temporal_channels");
  positive(grav_width, "grav_width");
  positive(gyro_width, "gyro_width");
  positive(lacc_width, "lacc_width");
  positive(local_width, "local_width");
  positive(attention_heads, "attention_heads");
  positive(ff_hidden, "ff_hidden");
  positive(epochs, "epochs");
  positive(batch_size, "batch_size");
  positive(lr_halving_epochs, "lr_halving_epochs");
  positive(runs, "runs");
  if (graph_mode != GraphMode::kOff) positive(graph_layers, "graph_layers");
  if (attention_layers != 2) throw ConfigError("config: attention_layers must be 2");
  if (temporal_channels % attention_heads != 0) {
    throw ConfigError("config: attention_heads must divide temporal_channels");
  }
  if (window < temporal_fusion::kMinTemporalLength) throw ConfigError("config: window must be at least 8");
  if (overlap >= window) throw ConfigError("config: overlap must be smaller than window");
  if (!(lr > 0.0)) throw ConfigError("config: lr must be positive");
  if (mixup_alpha < 0.0) throw ConfigError("config: mixup_alpha must be non-negative");
  if (!(tau_start > 0.0) || !(tau_end > 0.0)) throw ConfigError("config: temperatures must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("config: validation_fraction must lie in [0, 1)");
  }
}

void set_config_value(TsfConfig& config, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

TsfConfig read_config(std::istream& in) {
  TsfConfig c;
  std::map<std::string, std::string> kv;
  try {
    kv = datapipe::read_key_values(in);
  } catch (const datapipe::IngestionError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [k, v] : kv) set_config_value(c, k, v);
  c.validate();
  return c;
}

TsfConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  return read_config(in);
}

void write_config(std::ostream& out, const TsfConfig& config) {
  for (const Field& f : fields()) {
    out << "# " << f.help << '\n' << f.key << " = " << f.get(config) << '\n';
  }
}

void save_config(const std::filesystem::path& path, const TsfConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write " + path.string());
  write_config(out, config);
}

}  // namespace tsf::model_train
