#include "ptd/switch.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ptd/transient.hpp"

namespace ptd {

SwitchParams make_switch_params(ad::ParameterStore& store, const ModelConfig& cfg, nn::Rng& rng) {
  SwitchParams p;
  p.attention = nn::make_attn(store, "switch.attention", cfg.hidden_dim, encoded_width(cfg), cfg.attn_dim, rng,
                              cfg.attention_activation);
  p.cell = nn::make_gru(store, "switch.cell", cfg.hidden_dim + cfg.attn_dim, cfg.hidden_dim, rng);
  p.score = nn::make_linear(store, "switch.score", cfg.hidden_dim, 1, rng);
  p.beta_raw = store.add("switch.beta_raw",
                         Tensor({1, 1}, beta_raw_for(cfg.beta_init_per_mm)));
  return p;
}

double beta_raw_for(double beta_per_mm) {
  const double beta = beta_per_mm * 1e3;
  if (!(beta > 0.0)) throw std::invalid_argument("decay rate must be positive");
  return beta > 30.0 ? beta : std::log(std::expm1(beta));
}

double beta_per_mm(const ad::ParameterStore& store, const SwitchParams& p) {
  const double raw = store[p.beta_raw].value[0];
  const double beta = raw > 30.0 ? raw : std::log1p(std::exp(raw));
  return beta * 1e-3;
}

double discount(double beta_per_mm, const std::vector<double>& distances_mm) {
  if (distances_mm.empty()) return 0.0;
  double nearest = std::numeric_limits<double>::infinity();
  for (double d : distances_mm) nearest = std::min(nearest, d);
  return std::exp(-beta_per_mm * nearest);
}

std::string_view to_string(SwitchEvent e) {
  switch (e) {
    case SwitchEvent::none: return "none";
    case SwitchEvent::spawn: return "spawn";
    case SwitchEvent::terminate: return "terminate";
  }
  return "?";
}

SwitchState init_switch_state(ad::Tape& tape, const ModelConfig& cfg, std::size_t human) {
  SwitchState s;
  s.human = human;
  s.hidden = tape.constant(Tensor({1, cfg.hidden_dim}, 0.0));
  return s;
}

SwitchStepOutput switch_step(ad::Tape& tape, const SwitchParams& p, const ModelConfig& cfg, SwitchState& state,
                             const ad::Var& h_persistent, const std::vector<ad::Var>& features,
                             const std::vector<ad::Var>& motion, const std::vector<EntityClass>& classes) {
  const std::size_t r = state.human;
  if (features.size() != classes.size() || motion.size() != classes.size() || r >= classes.size() || classes[r] != EntityClass::human) {
    throw std::invalid_argument("switch_step: entity " + std::to_string(r) + " is not a human of this scene");
  }
  const ad::Var origin = ad::centroid(features[r]);
  std::vector<ad::Var> leaf_rows, distances;
  for (std::size_t l = 0; l < classes.size(); ++l) {
    if (l == r) continue;
    leaf_rows.push_back(encode_entity(tape, cfg, ad::ego_transform(features[l], origin), motion[l], classes[l]));
    distances.push_back(ad::centroid_distance(ad::centroid(features[l]), origin));
  }

  SwitchStepOutput out;
  ad::Var message;
  if (leaf_rows.empty()) {
    message = tape.constant(Tensor({1, cfg.attn_dim}, 0.0));
  } else {
    const ad::Var values = leaf_rows.size() == 1 ? leaf_rows.front() : ad::concat(leaf_rows, 0);
    auto a = nn::attn(tape, p.attention, state.hidden, values);
    message = a.output;
    out.attention = a.weights.value();
  }
  state.hidden = nn::gru_step(tape, p.cell, ad::concat({h_persistent, message}, 1), state.hidden);
  const ad::Var gate = ad::sigmoid(nn::linear(tape, p.score, state.hidden));

  if (distances.empty()) {
    out.gamma = 0.0;
    out.nearest = std::numeric_limits<double>::infinity();
    out.score = ad::scale(gate, 0.0);
  } else {
    const ad::Var nearest = distances.size() == 1 ? distances.front() : ad::min(ad::concat(distances, 0));
    const ad::Var beta = ad::softplus(tape.param(p.beta_raw));
    const double to_m = 1e-3 / cfg.coordinate_scale;
    const ad::Var gamma = ad::exp(ad::scale(ad::mul(beta, nearest), -to_m));
    out.gamma = gamma.value()[0];
    out.nearest = nearest.value()[0];
    out.score = ad::mul(gamma, gate);
  }
  state.last_score = out.score.value()[0];
  state.score_history.push_back(state.last_score);
  return out;
}

SwitchEvent switch_decide(SwitchState& state, double score, double threshold) {
  return switch_force(state, score >= threshold);
}

SwitchEvent switch_force(SwitchState& state, bool on) {
  SwitchEvent e = SwitchEvent::none;
  if (on && !state.on) e = SwitchEvent::spawn;
  if (!on && state.on) e = SwitchEvent::terminate;
  state.on = on;
  return e;
}

}  // namespace ptd
