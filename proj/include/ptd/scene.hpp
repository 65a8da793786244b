#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ptd/geometry.hpp"

namespace ptd {

struct SceneEntity {
  int id = 0;
  EntityClass cls = EntityClass::object;
  std::string class_label;
  std::vector<std::vector<Vec3>> frames;  // one point list per step

  EntityFeatures at(std::size_t step) const;

  bool operator==(const SceneEntity&) const = default;
};

// A recorded scene: every entity over the same number of steps plus one
// binary switch label per human and step.
struct Scene {
  std::string scene_id;
  double dt = 0.1;
  std::vector<SceneEntity> entities;  // ascending id
  std::map<int, std::vector<std::uint8_t>> switch_labels;

  std::size_t steps() const;
  std::vector<std::size_t> human_indices() const;
  std::vector<EntityFeatures> features_at(std::size_t step) const;
  bool has_interaction() const;
  // Throws std::invalid_argument on any broken invariant.
  void validate() const;

  bool operator==(const Scene&) const = default;
};

}  // namespace ptd
