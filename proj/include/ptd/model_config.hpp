#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "ptd/blocks.hpp"
#include "ptd/geometry.hpp"

namespace ptd {

enum class ModelMode { ptd, persistent_only };

std::string_view to_string(ModelMode m);
ModelMode parse_model_mode(std::string_view text);

struct ModelConfig {
  std::size_t hidden_dim = 64;
  std::size_t attn_dim = 32;
  std::size_t message_dim = 32;  // transient->persistent and center->leaf messages
  std::size_t mlp_hidden = 64;
  double rho_in_mm = 500.0;
  double rho_out_mm = 100.0;
  double beta_init_per_mm = 1.0 / 500.0;
  double switch_threshold = 0.5;
  std::size_t observe_steps = 10;
  std::size_t predict_steps = 20;
  nn::Activation attention_activation = nn::Activation::tanh;
  nn::Activation transient_message_activation = nn::Activation::tanh;
  ModelMode mode = ModelMode::ptd;
  double coordinate_scale = 2.5e-4;  // network units per millimetre
  bool motion_features = true;       // append the last-step displacement to every encoding
  double motion_scale = 40.0;        // displacement gain: inputs are multiplied, head outputs divided
  std::uint64_t seed = 1;

  void validate() const;
};

// Every entity enters the networks as its flattened points, optionally its
// displacement since the previous step (each zero-padded to the widest class),
// then a one-hot class indicator.
std::size_t encoded_width(const ModelConfig& cfg);

ad::Var encode_entity(ad::Tape& tape, const ModelConfig& cfg, const ad::Var& flat, const ad::Var& motion,
                      EntityClass cls);

inline std::size_t class_slot(EntityClass cls) { return cls == EntityClass::human ? 0 : 1; }

}  // namespace ptd
