#include "ptd/evaluation.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>
#include <thread>

namespace ptd {

void SwitchCounts::add(const SwitchCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
}

double SwitchCounts::precision() const { return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp); }
double SwitchCounts::recall() const { return tp + fn == 0 ? 1.0 : static_cast<double>(tp) / (tp + fn); }
double SwitchCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

SwitchCounts count_switch(const std::vector<std::uint8_t>& predicted, const std::vector<std::uint8_t>& labels) {
  if (predicted.size() != labels.size()) throw std::invalid_argument("count_switch: length mismatch");
  SwitchCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predicted[i] != 0, y = labels[i] != 0;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double mean_point_error(const std::vector<Vec3>& predicted, const std::vector<Vec3>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw std::invalid_argument("mean_point_error: size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) s += distance(predicted[k], truth[k]);
  return s / static_cast<double>(truth.size());
}

double SceneEval::ade() const {
  const std::size_t n = humans + objects;
  if (human_error_sum.empty() || n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < human_error_sum.size(); ++t) s += human_error_sum[t] + object_error_sum[t];
  return s / static_cast<double>(n * human_error_sum.size());
}

std::vector<std::vector<std::vector<Vec3>>> rollout_points(const Rollout& r, double coordinate_scale) {
  std::vector<std::vector<std::vector<Vec3>>> out;
  for (const auto& step : r.predictions) {
    std::vector<std::vector<Vec3>> entities;
    for (const auto& v : step) {
      const auto vals = v.value().values();
      std::vector<Vec3> pts;
      for (std::size_t k = 0; k + 2 < vals.size(); k += 3) {
        pts.push_back(Vec3{vals[k], vals[k + 1], vals[k + 2]} * (1.0 / coordinate_scale));
      }
      entities.push_back(std::move(pts));
    }
    out.push_back(std::move(entities));
  }
  return out;
}

SceneEval evaluate_scene(const PtdModel& model, const Scene& scene) {
  const std::size_t T = model.config.observe_steps, L = model.config.predict_steps;
  if (scene.steps() < T + L) {
    throw std::invalid_argument("evaluate: scene '" + scene.scene_id + "' has " + std::to_string(scene.steps()) +
                                " steps, the horizon needs " + std::to_string(T + L));
  }
  ad::Tape tape(&model.store);
  return score_rollout(scene, rollout(tape, model, scene), model.config.coordinate_scale);
}

SceneEval score_rollout(const Scene& scene, const Rollout& r, double coordinate_scale) {
  const std::size_t T = r.observe, L = r.horizon;
  if (scene.steps() < T + L) throw std::invalid_argument("evaluate: scene '" + scene.scene_id + "' is shorter than the horizon");
  const auto points = rollout_points(r, coordinate_scale);

  SceneEval e;
  e.scene_id = scene.scene_id;
  e.has_interaction = scene.has_interaction();
  e.human_error_sum.assign(L, 0.0);
  e.object_error_sum.assign(L, 0.0);
  for (const auto& ent : scene.entities) (ent.cls == EntityClass::human ? e.humans : e.objects) += 1;
  for (std::size_t k = 0; k < L; ++k) {
    for (std::size_t i = 0; i < scene.entities.size(); ++i) {
      const auto& ent = scene.entities[i];
      const double err = mean_point_error(points[k][i], ent.frames[T + k]);
      (ent.cls == EntityClass::human ? e.human_error_sum : e.object_error_sum)[k] += err;
      (r.sources[k][i].transient ? e.from_transient : e.from_persistent) += 1;
    }
  }

  for (std::size_t h = 0; h < scene.entities.size(); ++h) {
    if (scene.entities[h].cls != EntityClass::human) continue;
    const auto& labels = scene.switch_labels.at(scene.entities[h].id);
    std::vector<std::uint8_t> predicted(T + L, 0);
    const auto slot = std::find(r.humans.begin(), r.humans.end(), h);
    if (slot != r.humans.end()) {
      const std::size_t k = static_cast<std::size_t>(slot - r.humans.begin());
      for (std::size_t t = 0; t < T + L; ++t) predicted[t] = r.decisions[t][k];
    }
    e.switch_counts.add(count_switch(predicted, std::vector<std::uint8_t>(labels.begin(), labels.begin() + T + L)));
  }
  return e;
}

EvalReport aggregate(std::vector<SceneEval> scenes, std::size_t horizon) {
  std::sort(scenes.begin(), scenes.end(), [](const SceneEval& a, const SceneEval& b) { return a.scene_id < b.scene_id; });
  EvalReport rep;
  rep.horizon = horizon;
  rep.error_mm.assign(horizon, 0.0);
  rep.human_error_mm.assign(horizon, 0.0);
  rep.object_error_mm.assign(horizon, 0.0);
  std::size_t humans = 0, objects = 0;
  for (const auto& s : scenes) {
    if (s.human_error_sum.size() != horizon) throw std::invalid_argument("aggregate: horizon mismatch");
    for (std::size_t k = 0; k < horizon; ++k) {
      rep.human_error_mm[k] += s.human_error_sum[k];
      rep.object_error_mm[k] += s.object_error_sum[k];
    }
    humans += s.humans;
    objects += s.objects;
    rep.switch_counts.add(s.switch_counts);
    rep.from_persistent += s.from_persistent;
    rep.from_transient += s.from_transient;
  }
  for (std::size_t k = 0; k < horizon; ++k) {
    const double total = rep.human_error_mm[k] + rep.object_error_mm[k];
    rep.error_mm[k] = humans + objects ? total / static_cast<double>(humans + objects) : 0.0;
    rep.human_error_mm[k] = humans ? rep.human_error_mm[k] / static_cast<double>(humans) : 0.0;
    rep.object_error_mm[k] = objects ? rep.object_error_mm[k] / static_cast<double>(objects) : 0.0;
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  rep.ade_mm = mean(rep.error_mm);
  rep.ade_human_mm = mean(rep.human_error_mm);
  rep.ade_object_mm = mean(rep.object_error_mm);
  rep.scenes = std::move(scenes);
  return rep;
}

EvalReport evaluate(const PtdModel& model, const std::vector<Scene>& scenes, std::size_t threads) {
  std::vector<SceneEval> out(scenes.size());
  threads = std::max<std::size_t>(1, std::min(threads, scenes.size()));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < scenes.size(); i += threads) out[i] = evaluate_scene(model, scenes[i]);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return aggregate(std::move(out), model.config.predict_steps);
}

std::vector<Scene> interaction_scenes(const std::vector<Scene>& scenes) {
  std::vector<Scene> out;
  std::copy_if(scenes.begin(), scenes.end(), std::back_inserter(out), [](const Scene& s) { return s.has_interaction(); });
  return out;
}

}  // namespace ptd
