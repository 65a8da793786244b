#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ptd/evaluation.hpp"
#include "ptd/model.hpp"

namespace ptd {

struct TrainConfig {
  double lambda = 1.0;  // switch-loss weight
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; 0 disables clipping
  double train_fraction = 0.8;
  std::size_t threads = 1;

  void validate() const;
};

struct LossTerms {
  ad::Var total;
  ad::Var pred;
  std::optional<ad::Var> sw;  // absent without switches
};

// L_pred: mean squared error over horizon coordinates, in square millimetres.
// L_switch: mean binary cross-entropy over humans and steps 1..T+L.
LossTerms compute_loss(ad::Tape& tape, const Rollout& r, const Scene& scene, double coordinate_scale, double lambda);

class Adam {
 public:
  Adam(const ad::ParameterStore& store, const TrainConfig& cfg);

  // Clips, then updates in place. Returns false (and leaves the parameters
  // untouched) when the gradient is not finite.
  bool step(ad::ParameterStore& store, ad::Gradients& grads);
  std::size_t steps() const { return t_; }

 private:
  TrainConfig cfg_;
  ad::Gradients m_, v_;
  std::size_t t_ = 0;
};

struct DatasetSplit {
  std::vector<Scene> train;
  std::vector<Scene> validation;
};

// Positional: the first round(fraction * n) scenes train, the rest validate.
DatasetSplit split_dataset(const std::vector<Scene>& scenes, double train_fraction);

struct EpochMetrics {
  std::size_t epoch = 0;
  double l_pred = 0.0;
  double l_switch = 0.0;
  double val_ade_mm = 0.0;
  double switch_f1 = 0.0;
};

std::string metrics_header();
std::string metrics_row(const EpochMetrics& m);

struct SceneGradient {
  double l_pred = 0.0;
  double l_switch = 0.0;
};

// Adds d(total)/d(params) of one scene into grads.
SceneGradient scene_gradient(const PtdModel& model, const Scene& scene, double lambda, ad::Gradients& grads);

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  std::size_t skipped_updates = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

TrainResult train(PtdModel& model, const std::vector<Scene>& train_set, const std::vector<Scene>& validation,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace ptd
