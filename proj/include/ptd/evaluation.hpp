#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ptd/model.hpp"

namespace ptd {

struct SwitchCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  void add(const SwitchCounts& o);
  // With no predicted (or no true) positives precision (or recall) is 1.
  double precision() const;
  double recall() const;
  double f1() const;
};

SwitchCounts count_switch(const std::vector<std::uint8_t>& predicted, const std::vector<std::uint8_t>& labels);

// Mean Euclidean distance between corresponding points, millimetres.
double mean_point_error(const std::vector<Vec3>& predicted, const std::vector<Vec3>& truth);

struct SceneEval {
  std::string scene_id;
  bool has_interaction = false;
  // Per horizon step: sums of per-entity mean point errors and entity counts.
  std::vector<double> human_error_sum, object_error_sum;
  std::size_t humans = 0, objects = 0;
  SwitchCounts switch_counts;
  std::size_t from_persistent = 0, from_transient = 0;

  double ade() const;
};

struct EvalReport {
  std::size_t horizon = 0;
  std::vector<double> error_mm, human_error_mm, object_error_mm;  // per horizon step
  double ade_mm = 0.0, ade_human_mm = 0.0, ade_object_mm = 0.0;
  SwitchCounts switch_counts;
  std::size_t from_persistent = 0, from_transient = 0;
  std::vector<SceneEval> scenes;  // sorted by scene id
};

// Rolls the model out on a scene with at least T + L steps and labels.
SceneEval evaluate_scene(const PtdModel& model, const Scene& scene);
SceneEval score_rollout(const Scene& scene, const Rollout& r, double coordinate_scale);
// Aggregates in scene-id order, so the report does not depend on input order.
EvalReport aggregate(std::vector<SceneEval> scenes, std::size_t horizon);
EvalReport evaluate(const PtdModel& model, const std::vector<Scene>& scenes, std::size_t threads = 1);

// Scenes with at least one labelled interaction.
std::vector<Scene> interaction_scenes(const std::vector<Scene>& scenes);

// Scene from rollout predictions in millimetres, for inspection and export.
std::vector<std::vector<std::vector<Vec3>>> rollout_points(const Rollout& r, double coordinate_scale);

}  // namespace ptd
