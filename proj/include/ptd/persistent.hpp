#pragma once

#include <array>
#include <optional>
#include <vector>

#include "ptd/blocks.hpp"
#include "ptd/model_config.hpp"

// The persistent channel: a fully connected recurrent relational network over
// every entity of the scene, one recurrent cell and readout per entity class.
namespace ptd {

struct PersistentParams {
  nn::AttnParams attention;                 // query and values are [x ; h]
  std::array<nn::GruParams, 2> cell;        // indexed by class_slot()
  std::array<nn::MlpParams, 2> prediction;  // next-step displacement per class
  nn::MlpParams message;                    // m_{P->T}, humans only
};

PersistentParams make_persistent_params(ad::ParameterStore& store, const ModelConfig& cfg, nn::Rng& rng);

struct PersistentState {
  std::vector<EntityClass> classes;
  ad::Var hidden;  // N x hidden_dim, row i belongs to entity i
};

PersistentState init_persistent_state(ad::Tape& tape, const ModelConfig& cfg, std::vector<EntityClass> classes);

struct PersistentStepOutput {
  std::vector<ad::Var> predictions;                  // 1 x 3P per entity, network units
  std::vector<std::optional<ad::Var>> to_transient;  // m_{P->T}, present for humans
  Tensor attention;                                  // N x N, row i = weights over j != i
  Tensor consumed_incoming;                          // N x message_dim m_{T->P} slot actually fed
};

// features[i] is entity i's flattened points (1 x 3P) and motion[i] its
// displacement since the previous step. incoming[i] is the transient message
// for human i, or nullopt for the zero vector.
PersistentStepOutput persistent_step(ad::Tape& tape, const PersistentParams& p, const ModelConfig& cfg,
                                     PersistentState& state, const std::vector<ad::Var>& features,
                                     const std::vector<ad::Var>& motion,
                                     const std::vector<std::optional<ad::Var>>& incoming);

}  // namespace ptd
