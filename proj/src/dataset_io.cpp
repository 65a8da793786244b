#include "ptd/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace ptd {

using nlohmann::json;

DatasetError::DatasetError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

std::string scene_to_line(const Scene& scene) {
  json j;
  j["scene_id"] = scene.scene_id;
  j["dt"] = scene.dt;
  j["entities"] = json::array();
  for (const auto& e : scene.entities) {
    json frames = json::array();
    for (std::size_t t = 0; t < e.frames.size(); ++t) frames.push_back(e.at(t).flatten());
    j["entities"].push_back({{"id", e.id},
                             {"class", std::string(to_string(e.cls))},
                             {"class_label", e.class_label},
                             {"features", std::move(frames)}});
  }
  json labels = json::object();
  for (const auto& [id, bits] : scene.switch_labels) {
    json arr = json::array();
    for (auto b : bits) arr.push_back(static_cast<int>(b));
    labels[std::to_string(id)] = std::move(arr);
  }
  j["switch_labels"] = std::move(labels);
  return j.dump();
}

namespace {

struct Parser {
  const std::string& source;
  std::size_t line;

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw DatasetError(source, line, "field '" + field + "': " + what);
  }

  const json& member(const json& obj, const std::string& key, const std::string& path) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + key, "missing");
    return *it;
  }

  double number(const json& v, const std::string& field) const {
    if (!v.is_number()) fail(field, "expected a number");
    return v.get<double>();
  }

  int integer(const json& v, const std::string& field) const {
    if (!v.is_number_integer()) fail(field, "expected an integer");
    return v.get<int>();
  }

  std::string text(const json& v, const std::string& field) const {
    if (!v.is_string()) fail(field, "expected a string");
    return v.get<std::string>();
  }
};

}  // namespace

Scene scene_from_line(const std::string& line, std::size_t line_no, const std::string& source) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DatasetError(source, line_no, std::string("malformed record: ") + e.what());
  }
  const Parser p{source, line_no};
  if (!j.is_object()) throw DatasetError(source, line_no, "record is not an object");

  Scene s;
  s.scene_id = p.text(p.member(j, "scene_id", ""), "scene_id");
  s.dt = p.number(p.member(j, "dt", ""), "dt");
  const json& entities = p.member(j, "entities", "");
  if (!entities.is_array()) p.fail("entities", "expected an array");
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const std::string at = "entities[" + std::to_string(i) + "].";
    const json& e = entities[i];
    if (!e.is_object()) p.fail("entities[" + std::to_string(i) + "]", "expected an object");
    SceneEntity ent;
    ent.id = p.integer(p.member(e, "id", at), at + "id");
    try {
      ent.cls = parse_entity_class(p.text(p.member(e, "class", at), at + "class"));
    } catch (const std::invalid_argument& err) {
      p.fail(at + "class", err.what());
    }
    ent.class_label = p.text(p.member(e, "class_label", at), at + "class_label");
    const json& frames = p.member(e, "features", at);
    if (!frames.is_array()) p.fail(at + "features", "expected an array of steps");
    const std::size_t width = 3 * point_count(ent.cls);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const std::string field = at + "features[" + std::to_string(t) + "]";
      const json& f = frames[t];
      if (!f.is_array() || f.size() != width) {
        p.fail(field, "expected " + std::to_string(width) + " coordinates for a " + std::string(to_string(ent.cls)));
      }
      std::vector<double> flat;
      flat.reserve(width);
      for (std::size_t k = 0; k < width; ++k) flat.push_back(p.number(f[k], field));
      ent.frames.push_back(EntityFeatures::from_flat(ent.cls, ent.class_label, flat).points);
    }
    s.entities.push_back(std::move(ent));
  }
  const json& labels = p.member(j, "switch_labels", "");
  if (!labels.is_object()) p.fail("switch_labels", "expected an object keyed by human id");
  for (const auto& [key, bits] : labels.items()) {
    const std::string field = "switch_labels." + key;
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      p.fail(field, "key is not an entity id");
    }
    if (!bits.is_array()) p.fail(field, "expected a bit list");
    std::vector<std::uint8_t> out;
    for (const auto& b : bits) {
      if (!b.is_number_integer() || (b.get<int>() != 0 && b.get<int>() != 1)) p.fail(field, "labels must be 0 or 1");
      out.push_back(static_cast<std::uint8_t>(b.get<int>()));
    }
    s.switch_labels[id] = std::move(out);
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& err) {
    throw DatasetError(source, line_no, err.what());
  }
  return s;
}

void write_dataset(const std::vector<Scene>& scenes, std::ostream& out) {
  for (const auto& s : scenes) out << scene_to_line(s) << '\n';
}

void write_dataset(const std::vector<Scene>& scenes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset '" + path.string() + "'");
  write_dataset(scenes, out);
  if (!out) throw std::runtime_error("failed writing dataset '" + path.string() + "'");
}

std::vector<Scene> read_dataset(std::istream& in, const std::string& source) {
  std::vector<Scene> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(scene_from_line(line, line_no, source));
  }
  return out;
}

std::vector<Scene> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read dataset '" + path.string() + "'");
  return read_dataset(in, path.string());
}

}  // namespace ptd
