#include "ptd/model_config.hpp"

#include <stdexcept>
#include <string>

namespace ptd {

std::string_view to_string(ModelMode m) { return m == ModelMode::ptd ? "ptd" : "persistent_only"; }

ModelMode parse_model_mode(std::string_view text) {
  if (text == "ptd") return ModelMode::ptd;
  if (text == "persistent_only") return ModelMode::persistent_only;
  throw std::invalid_argument("unknown model mode '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (hidden_dim == 0 || attn_dim == 0 || message_dim == 0 || mlp_hidden == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (!(rho_out_mm >= 0.0) || !(rho_out_mm <= rho_in_mm)) {
    throw std::invalid_argument("need 0 <= rho_out_mm <= rho_in_mm");
  }
  if (!(beta_init_per_mm > 0.0)) throw std::invalid_argument("beta_init_per_mm must be positive");
  if (!(switch_threshold > 0.0 && switch_threshold <= 1.0)) {
    throw std::invalid_argument("switch_threshold must lie in (0, 1]");
  }
  if (observe_steps == 0) throw std::invalid_argument("observe_steps must be positive");
  if (!(coordinate_scale > 0.0)) throw std::invalid_argument("coordinate_scale must be positive");
  if (!(motion_scale > 0.0)) throw std::invalid_argument("motion_scale must be positive");
}

std::size_t encoded_width(const ModelConfig& cfg) {
  return (cfg.motion_features ? 2 : 1) * kMaxFeatureWidth + 2;
}

ad::Var encode_entity(ad::Tape& tape, const ModelConfig& cfg, const ad::Var& flat, const ad::Var& motion,
                      EntityClass cls) {
  const std::size_t width = 3 * point_count(cls);
  if (flat.size() != width || (cfg.motion_features && motion.size() != width)) {
    throw std::invalid_argument("encode_entity: " + std::string(to_string(cls)) + " row has " +
                                std::to_string(flat.size()) + " values");
  }
  const std::size_t pad = kMaxFeatureWidth - width;
  Tensor tail({1, pad + 2}, 0.0);
  tail[pad + class_slot(cls)] = 1.0;
  if (!cfg.motion_features) return ad::concat({flat, tape.constant(std::move(tail))}, 1);
  const ad::Var m = ad::scale(motion, cfg.motion_scale);
  if (pad == 0) return ad::concat({flat, m, tape.constant(std::move(tail))}, 1);
  return ad::concat({flat, tape.constant(Tensor({1, pad}, 0.0)), m, tape.constant(std::move(tail))}, 1);
}

}  // namespace ptd
