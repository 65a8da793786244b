#include "ptd/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace ptd {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (!(lambda >= 0.0)) fail("lambda must be non-negative");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("moment coefficients must lie in [0, 1)");
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (!(clip_norm >= 0.0)) fail("clip_norm must be non-negative");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) fail("train_fraction must lie in (0, 1]");
  if (threads == 0) fail("threads must be positive");
}

LossTerms compute_loss(ad::Tape& tape, const Rollout& r, const Scene& scene, double coordinate_scale, double lambda) {
  const std::size_t T = r.observe, L = r.horizon;
  if (scene.steps() < T + L) throw std::invalid_argument("compute_loss: scene shorter than the horizon");
  LossTerms out;

  if (L == 0) {
    out.pred = tape.constant(Tensor::scalar(0.0));
  } else {
    ad::Var sq;
    std::size_t count = 0;
    for (std::size_t k = 0; k < L; ++k) {
      const auto truth = scene_step_rows(tape, scene, T + k, coordinate_scale);
      std::vector<ad::Var> diffs;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        diffs.push_back(ad::sub(r.predictions[k][i], truth[i]));
        count += truth[i].size();
      }
      const ad::Var s = ad::squared_l2(ad::concat(diffs, 1));
      sq = sq.valid() ? ad::add(sq, s) : s;
    }
    // Square millimetres whatever the network scale.
    const double to_mm = 1.0 / coordinate_scale;
    out.pred = ad::scale(sq, to_mm * to_mm / static_cast<double>(count));
  }

  out.total = out.pred;
  if (!r.scores.empty() && !r.humans.empty()) {
    std::vector<ad::Var> scores;
    std::vector<double> targets;
    for (std::size_t t = 0; t < r.scores.size(); ++t) {
      for (std::size_t k = 0; k < r.humans.size(); ++k) {
        const int id = scene.entities[r.humans[k]].id;
        auto it = scene.switch_labels.find(id);
        if (it == scene.switch_labels.end() || it->second.size() <= t) {
          throw std::invalid_argument("compute_loss: scene '" + scene.scene_id + "' lacks switch labels for human " +
                                      std::to_string(id));
        }
        scores.push_back(r.scores[t][k]);
        targets.push_back(it->second[t]);
      }
    }
    const std::size_t n = scores.size();
    out.sw = ad::binary_cross_entropy(ad::concat(scores, 1), Tensor({1, n}, std::move(targets)));
    out.total = ad::add(out.pred, ad::scale(*out.sw, lambda));
  }
  return out;
}

Adam::Adam(const ad::ParameterStore& store, const TrainConfig& cfg) : cfg_(cfg), m_(store), v_(store) {}

bool Adam::step(ad::ParameterStore& store, ad::Gradients& grads) {
  if (!grads.all_finite()) return false;
  if (cfg_.clip_norm > 0.0) {
    const double norm = grads.global_norm();
    if (norm > cfg_.clip_norm) grads.scale(cfg_.clip_norm / norm);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < store.size(); ++p) {
    const ad::ParamId id{p};
    auto w = store[id].value.values();
    const auto g = grads[id].values();
    auto m = m_[id].values();
    auto v = v_[id].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
    }
  }
  return true;
}

DatasetSplit split_dataset(const std::vector<Scene>& scenes, double train_fraction) {
  if (scenes.empty()) throw std::invalid_argument("split_dataset: empty dataset");
  std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(scenes.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, scenes.size());
  DatasetSplit s;
  s.train.assign(scenes.begin(), scenes.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(scenes.begin() + static_cast<std::ptrdiff_t>(n_train), scenes.end());
  return s;
}

std::string metrics_header() { return "epoch,L_pred,L_switch,val_ADE_mm,switch_F1"; }

std::string metrics_row(const EpochMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.6f,%.6f", m.epoch, m.l_pred, m.l_switch, m.val_ade_mm, m.switch_f1);
  return buf;
}

SceneGradient scene_gradient(const PtdModel& model, const Scene& scene, double lambda, ad::Gradients& grads) {
  ad::Tape tape(&model.store);
  const Rollout r = rollout(tape, model, scene);
  const LossTerms loss = compute_loss(tape, r, scene, model.config.coordinate_scale, lambda);
  tape.backward(loss.total);
  tape.accumulate_parameter_grads(grads);
  return {loss.pred.value()[0], loss.sw ? loss.sw->value()[0] : 0.0};
}

TrainResult train(PtdModel& model, const std::vector<Scene>& train_set, const std::vector<Scene>& validation,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  Adam adam(model.store, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  TrainResult result;

  const std::size_t workers = std::max<std::size_t>(1, cfg.threads);
  std::vector<ad::Gradients> partial(workers, ad::Gradients(model.store));
  std::vector<SceneGradient> losses(train_set.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double sum_pred = 0.0, sum_switch = 0.0;

    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      for (auto& g : partial) g.zero();
      std::vector<std::exception_ptr> errors(workers);
      auto work = [&](std::size_t w) {
        try {
          for (std::size_t k = b0 + w; k < b1; k += workers) {
            losses[order[k]] = scene_gradient(model, train_set[order[k]], cfg.lambda, partial[w]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      };
      if (workers == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
      }
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
      for (std::size_t w = 1; w < workers; ++w) partial[0].add(partial[w]);
      partial[0].scale(1.0 / static_cast<double>(b1 - b0));
      for (std::size_t k = b0; k < b1; ++k) {
        sum_pred += losses[order[k]].l_pred;
        sum_switch += losses[order[k]].l_switch;
      }
      if (!adam.step(model.store, partial[0])) {
        ++result.skipped_updates;
        std::cerr << "warning: non-finite gradient in epoch " << epoch << ", update skipped\n";
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.l_pred = sum_pred / static_cast<double>(train_set.size());
    m.l_switch = sum_switch / static_cast<double>(train_set.size());
    if (!validation.empty()) {
      const EvalReport rep = evaluate(model, validation, cfg.threads);
      m.val_ade_mm = rep.ade_mm;
      m.switch_f1 = rep.switch_counts.f1();
    }
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

}  // namespace ptd
