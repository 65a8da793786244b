#include "ptd/persistent.hpp"

#include <stdexcept>
#include <string>

namespace ptd {

PersistentParams make_persistent_params(ad::ParameterStore& store, const ModelConfig& cfg, nn::Rng& rng) {
  const std::size_t u_dim = encoded_width(cfg) + cfg.hidden_dim;
  const std::size_t z_dim = encoded_width(cfg) + cfg.attn_dim + cfg.message_dim;
  PersistentParams p;
  p.attention = nn::make_attn(store, "persistent.attention", u_dim, u_dim, cfg.attn_dim, rng, cfg.attention_activation);
  for (EntityClass cls : {EntityClass::human, EntityClass::object}) {
    const std::string tag(to_string(cls));
    const auto slot = class_slot(cls);
    p.cell[slot] = nn::make_gru(store, "persistent.cell." + tag, z_dim, cfg.hidden_dim, rng);
    p.prediction[slot] = nn::make_mlp(store, "persistent.prediction." + tag,
                                      {cfg.hidden_dim, cfg.mlp_hidden, 3 * point_count(cls)}, rng);
  }
  p.message = nn::make_mlp(store, "persistent.message", {cfg.hidden_dim, cfg.mlp_hidden, cfg.hidden_dim}, rng);
  return p;
}

PersistentState init_persistent_state(ad::Tape& tape, const ModelConfig& cfg, std::vector<EntityClass> classes) {
  if (classes.empty()) throw std::invalid_argument("persistent state needs at least one entity");
  PersistentState s;
  s.hidden = tape.constant(Tensor({classes.size(), cfg.hidden_dim}, 0.0));
  s.classes = std::move(classes);
  return s;
}

PersistentStepOutput persistent_step(ad::Tape& tape, const PersistentParams& p, const ModelConfig& cfg,
                                     PersistentState& state, const std::vector<ad::Var>& features,
                                     const std::vector<ad::Var>& motion,
                                     const std::vector<std::optional<ad::Var>>& incoming) {
  const std::size_t n = state.classes.size();
  if (features.size() != n || motion.size() != n || incoming.size() != n) {
    throw std::invalid_argument("persistent_step: got features for " + std::to_string(features.size()) +
                                " entities, state has " + std::to_string(n));
  }

  std::vector<ad::Var> encoded, slots;
  encoded.reserve(n);
  slots.reserve(n);
  const ad::Var zero_message = tape.constant(Tensor({1, cfg.message_dim}, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    encoded.push_back(encode_entity(tape, cfg, features[i], motion[i], state.classes[i]));
    if (incoming[i]) {
      if (state.classes[i] != EntityClass::human) {
        throw std::invalid_argument("persistent_step: transient message for object entity " + std::to_string(i));
      }
      slots.push_back(*incoming[i]);
    } else {
      slots.push_back(zero_message);
    }
  }
  const ad::Var x = n == 1 ? encoded.front() : ad::concat(encoded, 0);
  const ad::Var m_tp = n == 1 ? slots.front() : ad::concat(slots, 0);

  // Neighbour message m_i = Attn(u_i, {u_j}_{j != i}); zero when i has no neighbour.
  PersistentStepOutput out;
  ad::Var neighbour;
  if (n >= 2) {
    const ad::Var u = ad::concat({x, state.hidden}, 1);
    std::vector<std::uint8_t> mask(n * n, 1);
    for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = 0;
    auto a = nn::attn(tape, p.attention, u, u, &mask);
    neighbour = a.output;
    out.attention = a.weights.value();
  } else {
    neighbour = tape.constant(Tensor({1, cfg.attn_dim}, 0.0));
    out.attention = Tensor({1, 1}, 0.0);
  }
  out.consumed_incoming = m_tp.value();
  const ad::Var z = ad::concat({x, neighbour, m_tp}, 1);

  // Class-specific recurrent update on the rows of each class.
  std::array<std::vector<std::size_t>, 2> rows;
  for (std::size_t i = 0; i < n; ++i) rows[class_slot(state.classes[i])].push_back(i);
  std::array<ad::Var, 2> hidden_by_class;
  std::vector<std::size_t> stacked_row(n);
  std::vector<ad::Var> stacked;
  std::size_t offset = 0;
  for (std::size_t slot = 0; slot < 2; ++slot) {
    if (rows[slot].empty()) continue;
    const auto zc = ad::gather_rows(z, rows[slot]);
    const auto hc = ad::gather_rows(state.hidden, rows[slot]);
    hidden_by_class[slot] = nn::gru_step(tape, p.cell[slot], zc, hc);
    for (std::size_t k = 0; k < rows[slot].size(); ++k) stacked_row[rows[slot][k]] = offset + k;
    offset += rows[slot].size();
    stacked.push_back(hidden_by_class[slot]);
  }
  state.hidden = ad::gather_rows(stacked.size() == 1 ? stacked.front() : ad::concat(stacked, 0), stacked_row);

  // Readouts: residual next-step prediction and, for humans, m_{P->T}.
  out.predictions.resize(n);
  out.to_transient.resize(n);
  for (std::size_t slot = 0; slot < 2; ++slot) {
    if (rows[slot].empty()) continue;
    const auto delta = ad::scale(nn::mlp_apply(tape, p.prediction[slot], hidden_by_class[slot]), 1.0 / cfg.motion_scale);
    std::optional<ad::Var> msg;
    if (slot == class_slot(EntityClass::human)) msg = nn::mlp_apply(tape, p.message, hidden_by_class[slot]);
    for (std::size_t k = 0; k < rows[slot].size(); ++k) {
      const std::size_t i = rows[slot][k];
      const bool single = rows[slot].size() == 1;
      out.predictions[i] = ad::add(features[i], single ? delta : ad::slice(delta, 0, k, k + 1));
      if (msg) out.to_transient[i] = single ? *msg : ad::slice(*msg, 0, k, k + 1);
    }
  }
  return out;
}

}  // namespace ptd
