#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ptd/scene.hpp"

// Scripted human-object scenes. Humans walk straight between waypoints; during
// an episode a human turns toward a movable object, carries it rigidly with the
// right hand for a while, releases it and walks on. Labels are 1 from the
// approach onset until the human has left the object's neighbourhood again.
namespace ptd {

struct GenConfig {
  std::size_t scenes = 250;
  std::size_t steps = 30;
  double dt = 0.1;
  std::size_t min_humans = 1;
  std::size_t max_humans = 2;
  std::size_t min_objects = 3;  // including the stationary table
  std::size_t max_objects = 5;
  double episode_rate = 0.8;    // chance that a human interacts in a scene
  std::size_t min_carry = 4;    // steps an object stays in the hand
  std::size_t max_carry = 8;
  std::size_t min_onset = 4;    // approach onset step (1-based)
  std::size_t max_onset = 14;
  double onset_radius_mm = 450.0;  // labelled neighbourhood around the target
  std::size_t label_lead = 0;      // label steps before the approach onset
  double arena_mm = 8000.0;        // side of the square floor
  double min_speed = 50.0;         // mm per step
  double max_speed = 100.0;
  double clearance_mm = 700.0;     // keep-out radius around unrelated entities
  std::uint64_t seed = 7;

  void validate() const;
};

// Throws std::runtime_error when the arena cannot fit the requested entities.
Scene generate_scene(const GenConfig& cfg, std::size_t index);
std::vector<Scene> generate_dataset(const GenConfig& cfg);

// Joint positions of the rig around a centroid; joint 4 is the right hand.
std::vector<Vec3> human_rig(const Vec3& center);
inline constexpr std::size_t kHandJoint = 4;
std::vector<Vec3> box_corners(const Vec3& center, const Vec3& half_extent);

}  // namespace ptd
