#pragma once

#include <cstdint>

#include "ptd/gradcheck.hpp"
#include "ptd/model.hpp"
#include "ptd/training.hpp"

// The small fixed scene used for whole-model gradient checks: one walking
// human carrying an object inside the outward radius, plus a second object
// inside the inward radius only. Three observed and two predicted steps.
namespace ptd {

Scene micro_scene(std::uint64_t seed);
ModelConfig micro_config(std::uint64_t seed);

// Switch on for steps 2..4 of the five, so a session spawns, feeds the
// persistent channel and terminates inside the rollout.
std::optional<bool> micro_switch_schedule(std::size_t step, std::size_t human);

struct MicroCheck {
  ad::GradCheckResult result;
  std::size_t parameters = 0;  // scalar count
  double seconds = 0.0;
};

MicroCheck micro_gradcheck(std::uint64_t seed, double step = 1e-5, double lambda = 1.0);

}  // namespace ptd
