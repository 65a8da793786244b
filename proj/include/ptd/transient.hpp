#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "ptd/blocks.hpp"
#include "ptd/model_config.hpp"

// The transient channel: an egocentric star graph around one human, spawned
// and terminated by that human's switch.
namespace ptd {

// Entities are addressed by their index in the scene. Distances and
// thresholds share whatever unit the centroids are given in.
struct TransientGraph {
  std::size_t center = 0;
  std::vector<std::size_t> leaves;    // every entity except the center, ascending
  std::vector<double> distances;      // aligned with leaves
  std::vector<std::uint8_t> inward;   // aligned with leaves
  std::vector<std::uint8_t> outward;  // aligned with leaves

  std::vector<std::size_t> inward_ids() const;
  std::vector<std::size_t> outward_ids() const;
  bool has_outward(std::size_t entity) const;
};

TransientGraph build_transient_graph(const std::vector<Vec3>& centroids, const std::vector<EntityClass>& classes,
                                     std::size_t center, double rho_in, double rho_out);
// Millimetre features straight from a scene.
TransientGraph build_transient_graph(const std::vector<EntityFeatures>& features, std::size_t center, double rho_in_mm,
                                     double rho_out_mm);

struct TransientParams {
  nn::AttnParams attention;                // query [x_r ; h_r], values [x_l ; h_l]
  nn::GruParams center;                    // input [x_r ; m_{l->r} ; m_{P->T}]
  nn::GruParams leaf;                      // input [x_l ; m_{r->l}]
  nn::MlpParams outward;                   // m_{r->l} from h_r
  std::array<nn::MlpParams, 2> readout;    // per class, egocentric displacement
  nn::MlpParams to_persistent;             // m_{T->P} before the output activation
};

TransientParams make_transient_params(ad::ParameterStore& store, const ModelConfig& cfg, nn::Rng& rng);

struct TransientSession {
  std::size_t center = 0;
  std::size_t start_step = 0;
  bool live = true;
  TransientGraph graph;
  ad::Var center_hidden;                  // 1 x H
  std::vector<ad::Var> leaf_hidden;       // indexed by entity; the center slot is unused
  std::vector<std::uint8_t> leaf_touched; // leaf ever updated through an outward edge
};

TransientSession spawn_session(ad::Tape& tape, const ModelConfig& cfg, const std::vector<EntityClass>& classes,
                               std::size_t center, std::size_t step);

struct TransientStepOutput {
  std::vector<std::optional<ad::Var>> predictions;  // center and outward leaves, global network units
  ad::Var to_persistent;                            // m_{T->P}, 1 x message_dim
  Tensor inward_attention;                          // 1 x |inward| weights (empty when no inward edge)
  double from_persistent_norm = 0.0;
  double to_persistent_norm = 0.0;
};

// features are 1 x 3P rows in network units for every entity and motion their
// last-step displacements; the graph is rebuilt from the features first.
TransientStepOutput transient_step(ad::Tape& tape, const TransientParams& p, const ModelConfig& cfg,
                                   TransientSession& session, const std::vector<ad::Var>& features,
                                   const std::vector<ad::Var>& motion, const std::vector<EntityClass>& classes,
                                   const ad::Var& from_persistent);

Vec3 to_vec3(const ad::Var& centroid_row);

}  // namespace ptd
