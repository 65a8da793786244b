#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ptd/persistent.hpp"
#include "ptd/scene.hpp"
#include "ptd/switch.hpp"
#include "ptd/transient.hpp"

// Runs the persistent channel, the switches and the live transient sessions
// for one step, routes messages between them and combines their predictions.
namespace ptd {

struct PtdParams {
  PersistentParams persistent;
  TransientParams transient;
  SwitchParams sw;
};

struct PtdModel {
  ModelConfig config;
  ad::ParameterStore store;
  PtdParams params;

  // Parameters are drawn from config.seed.
  static PtdModel create(const ModelConfig& config);
};

struct PredictionSource {
  bool transient = false;
  std::size_t center = 0;  // session owner when transient

  bool operator==(const PredictionSource&) const = default;
};

struct SessionDiagnostics {
  std::size_t center = 0;
  std::vector<std::size_t> inward;
  std::vector<std::size_t> outward;
  std::vector<double> distances_mm;  // over graph leaves
  Tensor inward_attention;
  double from_persistent_norm = 0.0;
  double to_persistent_norm = 0.0;
};

struct StepDiagnostics {
  Tensor persistent_attention;
  Tensor consumed_incoming;  // m_{T->P} rows fed to the persistent cells
  std::vector<SessionDiagnostics> sessions;
  std::map<std::size_t, Tensor> switch_attention;
  std::map<std::size_t, double> gamma;
};

struct ModelState {
  std::vector<EntityClass> classes;
  PersistentState persistent;
  std::map<std::size_t, SwitchState> switches;          // keyed by human index
  std::map<std::size_t, TransientSession> sessions;     // live sessions only
  std::vector<std::optional<ad::Var>> pending_message;  // m_{T->P} for the next step
  std::vector<ad::Var> previous;                        // last step's input features
  std::size_t step = 0;                                 // steps taken so far
};

ModelState init_model_state(ad::Tape& tape, const PtdModel& model, std::vector<EntityClass> classes);

struct SwitchRecord {
  std::size_t human = 0;
  ad::Var score;
  bool on = false;
  SwitchEvent event = SwitchEvent::none;
};

struct StepResult {
  std::vector<ad::Var> predictions;  // next-step features per entity, network units
  std::vector<PredictionSource> sources;
  std::vector<SwitchRecord> switches;  // ascending human index
  std::optional<StepDiagnostics> diagnostics;
};

// Forces a human's status at a step (1-based) instead of thresholding its score.
using SwitchOverride = std::function<std::optional<bool>(std::size_t step, std::size_t human)>;

struct StepOptions {
  bool diagnostics = false;
  SwitchOverride override_switch;
};

StepResult model_step(ad::Tape& tape, const PtdModel& model, ModelState& state, const std::vector<ad::Var>& features,
                      const StepOptions& options = {});

struct TransientCandidate {
  std::size_t center = 0;
  double score = 0.0;
  const TransientGraph* graph = nullptr;
  const std::vector<std::optional<ad::Var>>* predictions = nullptr;
};

// Transient predictions take priority: a human with a live session uses its
// own; an object reached by outward edges uses the highest-scoring session
// (ties go to the lowest center index); everything else stays persistent.
void combine_predictions(const std::vector<ad::Var>& persistent, const std::vector<EntityClass>& classes,
                         const std::vector<TransientCandidate>& sessions, std::vector<ad::Var>& out,
                         std::vector<PredictionSource>& sources);

struct Rollout {
  std::size_t observe = 0;
  std::size_t horizon = 0;
  std::vector<std::vector<ad::Var>> predictions;            // [horizon step][entity], steps T+1..T+L
  std::vector<std::vector<PredictionSource>> sources;       // aligned with predictions
  std::vector<std::size_t> humans;                          // ascending entity index
  std::vector<std::vector<ad::Var>> scores;                 // [step 1..T+L][human], empty when persistent-only
  std::vector<std::vector<std::uint8_t>> decisions;         // aligned with scores
  std::vector<StepDiagnostics> diagnostics;                 // per step when requested
};

// Feature rows of a scene step in network units.
std::vector<ad::Var> scene_step_rows(ad::Tape& tape, const Scene& scene, std::size_t step0, double scale);

Rollout rollout(ad::Tape& tape, const PtdModel& model, const Scene& scene, const StepOptions& options = {});

}  // namespace ptd
