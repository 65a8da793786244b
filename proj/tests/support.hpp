#pragma once

#include <vector>

#include "ptd/model.hpp"

namespace ptd::test_support {

struct StepInputs {
  std::vector<ad::Var> features;
  std::vector<ad::Var> motion;
};

// Network-unit rows of one scene step plus their displacement since the previous step.
inline StepInputs step_inputs(ad::Tape& tape, const Scene& scene, std::size_t step0, double scale,
                              const Vec3& shift = {}) {
  auto rows = [&](std::size_t t) {
    auto out = scene_step_rows(tape, scene, t, scale);
    if (shift == Vec3{}) return out;
    for (auto& r : out) {
      Tensor moved = r.value();
      for (std::size_t k = 0; k < moved.size(); k += 3) {
        moved[k] += shift.x;
        moved[k + 1] += shift.y;
        moved[k + 2] += shift.z;
      }
      r = tape.constant(moved);
    }
    return out;
  };
  StepInputs in;
  in.features = rows(step0);
  const auto prev = step0 == 0 ? in.features : rows(step0 - 1);
  for (std::size_t i = 0; i < in.features.size(); ++i) in.motion.push_back(in.features[i] - prev[i]);
  return in;
}

inline std::vector<EntityClass> classes_of(const Scene& scene) {
  std::vector<EntityClass> out;
  for (const auto& e : scene.entities) out.push_back(e.cls);
  return out;
}

inline ModelConfig small_config() {
  ModelConfig cfg;
  cfg.hidden_dim = 6;
  cfg.attn_dim = 4;
  cfg.message_dim = 5;
  cfg.mlp_hidden = 7;
  return cfg;
}

// Rollout whose predictions are the recorded future shifted by offset_mm in
// every coordinate, with every score equal to `score` and decided at 0.5.
inline Rollout scripted_rollout(ad::Tape& tape, const Scene& scene, std::size_t observe, std::size_t horizon,
                                double scale, double offset_mm, double score) {
  Rollout r;
  r.observe = observe;
  r.horizon = horizon;
  r.humans = scene.human_indices();
  for (std::size_t k = 0; k < horizon; ++k) {
    std::vector<ad::Var> step;
    for (const auto& row : scene_step_rows(tape, scene, observe + k, scale)) {
      Tensor moved = row.value();
      for (auto& v : moved.values()) v += offset_mm * scale;
      step.push_back(tape.constant(moved));
    }
    r.predictions.push_back(step);
    r.sources.emplace_back(scene.entities.size());
  }
  for (std::size_t t = 0; t < observe + horizon; ++t) {
    r.scores.emplace_back(r.humans.size(), tape.constant(Tensor({1, 1}, score)));
    r.decisions.emplace_back(r.humans.size(), score >= 0.5 ? 1 : 0);
  }
  return r;
}

}  // namespace ptd::test_support
