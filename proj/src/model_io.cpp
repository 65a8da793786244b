#include "ptd/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "ptd/config.hpp"

namespace ptd {

using nlohmann::json;

void save_model(const PtdModel& model, const std::filesystem::path& path) {
  RunConfig rc;
  rc.model = model.config;
  json j;
  j["format"] = "ptd-model/1";
  j["config"] = format_config(rc, "model.");
  j["parameters"] = json::array();
  for (const auto& p : model.store) {
    j["parameters"].push_back({{"name", p.name},
                               {"shape", p.value.shape()},
                               {"values", std::vector<double>(p.value.values().begin(), p.value.values().end())}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model '" + path.string() + "'");
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("failed writing model '" + path.string() + "'");
}

PtdModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read model '" + path.string() + "'");
  const std::string where = "model '" + path.string() + "': ";
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(where + e.what());
  }
  if (j.value("format", "") != "ptd-model/1") throw std::runtime_error(where + "unknown format");
  std::istringstream cfg_text(j.at("config").get<std::string>());
  const RunConfig rc = parse_config(cfg_text, path.string());
  PtdModel m = PtdModel::create(rc.model);

  const auto& params = j.at("parameters");
  if (params.size() != m.store.size()) throw std::runtime_error(where + "parameter count mismatch");
  for (const auto& p : params) {
    const auto name = p.at("name").get<std::string>();
    const auto id = m.store.find(name);
    if (!id) throw std::runtime_error(where + "unexpected parameter '" + name + "'");
    Tensor& dst = m.store[*id].value;
    const auto shape = p.at("shape").get<Shape>();
    const auto values = p.at("values").get<std::vector<double>>();
    if (shape != dst.shape() || values.size() != dst.size()) {
      throw std::runtime_error(where + "parameter '" + name + "' has shape " + shape_string(shape) + ", expected " +
                               shape_string(dst.shape()));
    }
    dst = Tensor(shape, values);
  }
  return m;
}

}  // namespace ptd
