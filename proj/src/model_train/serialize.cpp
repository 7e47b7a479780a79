#include "tsf/model_train/serialize.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tsf/datapipe/io.hpp"

namespace tsf::model_train {

namespace {
constexpr const char* kMagic = "TSFMODEL1";
}

void save_model(const std::filesystem::path& path, TsfModel& model,
                const std::optional<datapipe::NormStats>& normalization) {
  nlohmann::json header;
  std::stringstream cfg;
  write_config(cfg, model.config());
  header["config"] = datapipe::read_key_values(cfg);
  if (normalization) {
    header["normalization"] = {{"mean", normalization->mean}, {"std", normalization->std}};
  }
  nlohmann::json params = nlohmann::json::array();
  const numerics::ParameterList ps = model.parameters();
  for (const numerics::Parameter* p : ps) params.push_back({{"name", p->name}, {"shape", p->tensor.shape()}});
  header["parameters"] = params;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out << kMagic << '\n' << header.dump() << '\n';
  for (const numerics::Parameter* p : ps) {
    const auto v = p->tensor.values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing model file " + path.string());
}

SavedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::string magic, line;
  std::getline(in, magic);
  if (magic != kMagic) throw std::runtime_error(path.string() + " is not a model file");
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("model header: " + std::string(e.what()));
  }
  TsfConfig cfg;
  for (const auto& [k, v] : header.at("config").items()) set_config_value(cfg, k, v.get<std::string>());
  SavedModel saved{TsfModel(cfg), std::nullopt};
  if (header.contains("normalization")) {
    datapipe::NormStats s;
    s.mean = header["normalization"]["mean"].get<std::array<double, datapipe::kSensorKinds>>();
    s.std = header["normalization"]["std"].get<std::array<double, datapipe::kSensorKinds>>();
    saved.normalization = s;
  }
  const numerics::ParameterList ps = saved.model.parameters();
  const auto& listed = header.at("parameters");
  if (listed.size() != ps.size()) throw std::runtime_error("model file parameter count mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (listed[i].at("name").get<std::string>() != ps[i]->name ||
        listed[i].at("shape").get<numerics::Shape>() != ps[i]->tensor.shape()) {
      throw std::runtime_error("model file parameter mismatch at " + ps[i]->name);
    }
    auto v = ps[i]->tensor.values_mut();
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw std::runtime_error("model file truncated at " + ps[i]->name);
  }
  return saved;
}

}  // namespace tsf::model_train
