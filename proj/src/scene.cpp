#include "ptd/scene.hpp"

#include <algorithm>
#include <stdexcept>

namespace ptd {

EntityFeatures SceneEntity::at(std::size_t step) const {
  return EntityFeatures{cls, class_label, frames.at(step)};
}

std::size_t Scene::steps() const { return entities.empty() ? 0 : entities.front().frames.size(); }

std::vector<std::size_t> Scene::human_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entities.size(); ++i)
    if (entities[i].cls == EntityClass::human) out.push_back(i);
  return out;
}

std::vector<EntityFeatures> Scene::features_at(std::size_t step) const {
  std::vector<EntityFeatures> out;
  out.reserve(entities.size());
  for (const auto& e : entities) out.push_back(e.at(step));
  return out;
}

bool Scene::has_interaction() const {
  return std::any_of(switch_labels.begin(), switch_labels.end(), [](const auto& kv) {
    return std::any_of(kv.second.begin(), kv.second.end(), [](std::uint8_t b) { return b != 0; });
  });
}

void Scene::validate() const {
  const std::string where = "scene '" + scene_id + "': ";
  if (!(dt > 0.0)) throw std::invalid_argument(where + "dt must be positive");
  if (entities.empty()) throw std::invalid_argument(where + "no entities");
  const std::size_t n = steps();
  if (n == 0) throw std::invalid_argument(where + "no time steps");
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const auto& e = entities[i];
    if (i > 0 && entities[i - 1].id >= e.id) throw std::invalid_argument(where + "entity ids must be ascending");
    if (e.frames.size() != n) {
      throw std::invalid_argument(where + "entity " + std::to_string(e.id) + " has " +
                                  std::to_string(e.frames.size()) + " steps, expected " + std::to_string(n));
    }
    for (std::size_t t = 0; t < n; ++t) e.at(t).validate();
    const bool labelled = switch_labels.count(e.id) > 0;
    if (e.cls == EntityClass::human && !labelled) {
      throw std::invalid_argument(where + "human " + std::to_string(e.id) + " has no switch labels");
    }
    if (e.cls == EntityClass::object && labelled) {
      throw std::invalid_argument(where + "object " + std::to_string(e.id) + " has switch labels");
    }
  }
  for (const auto& [id, bits] : switch_labels) {
    const bool known = std::any_of(entities.begin(), entities.end(), [id = id](const SceneEntity& e) {
      return e.id == id && e.cls == EntityClass::human;
    });
    if (!known) throw std::invalid_argument(where + "switch labels for unknown human " + std::to_string(id));
    if (bits.size() != n) throw std::invalid_argument(where + "switch labels of " + std::to_string(id) + " have wrong length");
    for (auto b : bits)
      if (b > 1) throw std::invalid_argument(where + "switch label outside {0,1}");
  }
}

}  // namespace ptd
