#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "ptd/blocks.hpp"
#include "ptd/model_config.hpp"

// The transient switch: a recurrent gate per human whose score, discounted by
// the distance to the nearest other entity, spawns and terminates sessions.
namespace ptd {

struct SwitchParams {
  nn::AttnParams attention;  // query h_s, values egocentric leaf encodings
  nn::GruParams cell;        // input [h_P ; m_s]
  nn::Linear score;          // h_s -> logit
  ad::ParamId beta_raw;      // decay rate per metre = softplus(beta_raw)
};

SwitchParams make_switch_params(ad::ParameterStore& store, const ModelConfig& cfg, nn::Rng& rng);

// Inverse of softplus, for setting the decay rate directly.
double beta_raw_for(double beta_per_mm);
double beta_per_mm(const ad::ParameterStore& store, const SwitchParams& p);

// exp(-beta * d); zero when there is no other entity.
double discount(double beta_per_mm, const std::vector<double>& distances_mm);

enum class SwitchEvent { none, spawn, terminate };
std::string_view to_string(SwitchEvent e);

struct SwitchState {
  std::size_t human = 0;
  ad::Var hidden;  // 1 x H
  bool on = false;
  double last_score = 0.0;
  std::vector<double> score_history;
};

SwitchState init_switch_state(ad::Tape& tape, const ModelConfig& cfg, std::size_t human);

struct SwitchStepOutput {
  ad::Var score;  // 1 x 1, p = gamma * sigmoid(W h_s)
  double gamma = 0.0;
  double nearest = 0.0;  // network units; infinity without leaves
  Tensor attention;      // 1 x (N-1) leaf weights
};

// h_persistent is the human's freshly updated persistent hidden (1 x H);
// features are every entity's 1 x 3P row in network units, motion their
// last-step displacements.
SwitchStepOutput switch_step(ad::Tape& tape, const SwitchParams& p, const ModelConfig& cfg, SwitchState& state,
                             const ad::Var& h_persistent, const std::vector<ad::Var>& features,
                             const std::vector<ad::Var>& motion, const std::vector<EntityClass>& classes);

// On iff score >= threshold; reports the transition and updates the status.
SwitchEvent switch_decide(SwitchState& state, double score, double threshold = 0.5);
// Applies an externally forced status with the same transition bookkeeping.
SwitchEvent switch_force(SwitchState& state, bool on);

}  // namespace ptd
