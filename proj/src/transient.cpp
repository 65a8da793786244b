#include "ptd/transient.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ptd {

std::vector<std::size_t> TransientGraph::inward_ids() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < leaves.size(); ++k)
    if (inward[k]) out.push_back(leaves[k]);
  return out;
}

std::vector<std::size_t> TransientGraph::outward_ids() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < leaves.size(); ++k)
    if (outward[k]) out.push_back(leaves[k]);
  return out;
}

bool TransientGraph::has_outward(std::size_t entity) const {
  for (std::size_t k = 0; k < leaves.size(); ++k)
    if (leaves[k] == entity) return outward[k] != 0;
  return false;
}

TransientGraph build_transient_graph(const std::vector<Vec3>& centroids, const std::vector<EntityClass>& classes,
                                     std::size_t center, double rho_in, double rho_out) {
  if (!(rho_out <= rho_in)) throw std::invalid_argument("transient graph: rho_out must not exceed rho_in");
  if (centroids.size() != classes.size() || center >= classes.size()) {
    throw std::invalid_argument("transient graph: center " + std::to_string(center) + " out of range");
  }
  if (classes[center] != EntityClass::human) {
    throw std::invalid_argument("transient graph: center " + std::to_string(center) + " is not a human");
  }
  TransientGraph g;
  g.center = center;
  for (std::size_t l = 0; l < centroids.size(); ++l) {
    if (l == center) continue;
    const double d = distance(centroids[center], centroids[l]);
    g.leaves.push_back(l);
    g.distances.push_back(d);
    g.inward.push_back(d <= rho_in ? 1 : 0);
    g.outward.push_back(d <= rho_out ? 1 : 0);
  }
  return g;
}

TransientGraph build_transient_graph(const std::vector<EntityFeatures>& features, std::size_t center, double rho_in_mm,
                                     double rho_out_mm) {
  std::vector<Vec3> centroids;
  std::vector<EntityClass> classes;
  for (const auto& f : features) {
    centroids.push_back(centroid(f));
    classes.push_back(f.cls);
  }
  return build_transient_graph(centroids, classes, center, rho_in_mm, rho_out_mm);
}

TransientParams make_transient_params(ad::ParameterStore& store, const ModelConfig& cfg, nn::Rng& rng) {
  const std::size_t width = encoded_width(cfg);
  const std::size_t node_dim = width + cfg.hidden_dim;
  TransientParams p;
  p.attention = nn::make_attn(store, "transient.attention", node_dim, node_dim, cfg.attn_dim, rng,
                              cfg.attention_activation);
  p.center = nn::make_gru(store, "transient.center", width + cfg.attn_dim + cfg.hidden_dim, cfg.hidden_dim,
                          rng);
  p.leaf = nn::make_gru(store, "transient.leaf", width + cfg.message_dim, cfg.hidden_dim, rng);
  p.outward = nn::make_mlp(store, "transient.outward", {cfg.hidden_dim, cfg.mlp_hidden, cfg.message_dim}, rng);
  for (EntityClass cls : {EntityClass::human, EntityClass::object}) {
    p.readout[class_slot(cls)] = nn::make_mlp(store, "transient.readout." + std::string(to_string(cls)),
                                              {cfg.hidden_dim, cfg.mlp_hidden, 3 * point_count(cls)}, rng);
  }
  p.to_persistent = nn::make_mlp(store, "transient.to_persistent", {cfg.hidden_dim, cfg.mlp_hidden, cfg.message_dim},
                                 rng);
  return p;
}

TransientSession spawn_session(ad::Tape& tape, const ModelConfig& cfg, const std::vector<EntityClass>& classes,
                               std::size_t center, std::size_t step) {
  if (center >= classes.size() || classes[center] != EntityClass::human) {
    throw std::invalid_argument("spawn_session: entity " + std::to_string(center) + " is not a human");
  }
  TransientSession s;
  s.center = center;
  s.start_step = step;
  const ad::Var zero = tape.constant(Tensor({1, cfg.hidden_dim}, 0.0));
  s.center_hidden = zero;
  s.leaf_hidden.assign(classes.size(), zero);
  s.leaf_touched.assign(classes.size(), 0);
  return s;
}

Vec3 to_vec3(const ad::Var& centroid_row) {
  const auto& v = centroid_row.value();
  return {v[0], v[1], v[2]};
}

namespace {

double row_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TransientStepOutput transient_step(ad::Tape& tape, const TransientParams& p, const ModelConfig& cfg,
                                   TransientSession& session, const std::vector<ad::Var>& features,
                                   const std::vector<ad::Var>& motion, const std::vector<EntityClass>& classes,
                                   const ad::Var& from_persistent) {
  if (!session.live) throw std::logic_error("transient_step: session is not live");
  const std::size_t n = classes.size();
  if (features.size() != n || motion.size() != n || session.leaf_hidden.size() != n) {
    throw std::invalid_argument("transient_step: entity count changed during the session");
  }
  const std::size_t r = session.center;

  std::vector<ad::Var> centroid_rows;
  std::vector<Vec3> centroids;
  centroid_rows.reserve(n);
  for (const auto& f : features) {
    centroid_rows.push_back(ad::centroid(f));
    centroids.push_back(to_vec3(centroid_rows.back()));
  }
  const double scale = cfg.coordinate_scale;
  session.graph = build_transient_graph(centroids, classes, r, cfg.rho_in_mm * scale, cfg.rho_out_mm * scale);
  const TransientGraph& g = session.graph;
  const ad::Var& origin = centroid_rows[r];

  std::vector<ad::Var> ego(n);
  auto ego_of = [&](std::size_t i) -> const ad::Var& {
    if (!ego[i].valid()) ego[i] = ad::ego_transform(features[i], origin);
    return ego[i];
  };
  std::vector<ad::Var> encoded(n);
  auto encoded_of = [&](std::size_t i) -> const ad::Var& {
    if (!encoded[i].valid()) encoded[i] = encode_entity(tape, cfg, ego_of(i), motion[i], classes[i]);
    return encoded[i];
  };

  TransientStepOutput out;
  out.from_persistent_norm = row_norm(from_persistent.value());

  // Center: attention over inward leaves, then the center cell.
  ad::Var inward_message;
  const auto inward = g.inward_ids();
  if (inward.empty()) {
    inward_message = tape.constant(Tensor({1, cfg.attn_dim}, 0.0));
  } else {
    std::vector<ad::Var> rows;
    for (std::size_t l : inward) rows.push_back(ad::concat({encoded_of(l), session.leaf_hidden[l]}, 1));
    const ad::Var values = rows.size() == 1 ? rows.front() : ad::concat(rows, 0);
    const ad::Var query = ad::concat({encoded_of(r), session.center_hidden}, 1);
    auto a = nn::attn(tape, p.attention, query, values);
    inward_message = a.output;
    out.inward_attention = a.weights.value();
  }
  const ad::Var z_r = ad::concat({encoded_of(r), inward_message, from_persistent}, 1);
  session.center_hidden = nn::gru_step(tape, p.center, z_r, session.center_hidden);
  const ad::Var& h_r = session.center_hidden;

  // Outward leaves update from the center's message; all others keep their state.
  const auto outward = g.outward_ids();
  out.predictions.assign(n, std::nullopt);
  if (!outward.empty()) {
    const ad::Var m_rl = nn::mlp_apply(tape, p.outward, h_r);
    std::vector<ad::Var> z_rows, h_rows;
    for (std::size_t l : outward) {
      z_rows.push_back(ad::concat({encoded_of(l), m_rl}, 1));
      h_rows.push_back(session.leaf_hidden[l]);
    }
    const bool single = outward.size() == 1;
    const ad::Var h_new = nn::gru_step(tape, p.leaf, single ? z_rows.front() : ad::concat(z_rows, 0),
                                       single ? h_rows.front() : ad::concat(h_rows, 0));
    for (std::size_t k = 0; k < outward.size(); ++k) {
      const std::size_t l = outward[k];
      session.leaf_hidden[l] = single ? h_new : ad::slice(h_new, 0, k, k + 1);
      session.leaf_touched[l] = 1;
    }
  }

  // Readouts: egocentric residual mapped back to global coordinates.
  auto readout = [&](std::size_t i, const ad::Var& h) {
    const auto delta = ad::scale(nn::mlp_apply(tape, p.readout[class_slot(classes[i])], h), 1.0 / cfg.motion_scale);
    out.predictions[i] = ad::ego_inverse(ad::add(ego_of(i), delta), origin);
  };
  readout(r, h_r);
  for (std::size_t l : outward) readout(l, session.leaf_hidden[l]);

  out.to_persistent = nn::activate(cfg.transient_message_activation, nn::mlp_apply(tape, p.to_persistent, h_r));
  out.to_persistent_norm = row_norm(out.to_persistent.value());
  return out;
}

}  // namespace ptd
