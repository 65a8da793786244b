#include "ptd/model.hpp"

#include <stdexcept>
#include <string>

namespace ptd {

PtdModel PtdModel::create(const ModelConfig& config) {
  config.validate();
  PtdModel m;
  m.config = config;
  nn::Rng rng(config.seed);
  m.params.persistent = make_persistent_params(m.store, config, rng);
  m.params.transient = make_transient_params(m.store, config, rng);
  m.params.sw = make_switch_params(m.store, config, rng);
  return m;
}

ModelState init_model_state(ad::Tape& tape, const PtdModel& model, std::vector<EntityClass> classes) {
  ModelState s;
  s.persistent = init_persistent_state(tape, model.config, classes);
  if (model.config.mode == ModelMode::ptd) {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == EntityClass::human) s.switches.emplace(i, init_switch_state(tape, model.config, i));
  }
  s.pending_message.assign(classes.size(), std::nullopt);
  s.classes = std::move(classes);
  return s;
}

void combine_predictions(const std::vector<ad::Var>& persistent, const std::vector<EntityClass>& classes,
                         const std::vector<TransientCandidate>& sessions, std::vector<ad::Var>& out,
                         std::vector<PredictionSource>& sources) {
  const std::size_t n = persistent.size();
  if (classes.size() != n) throw std::invalid_argument("combine_predictions: class list does not match predictions");
  out = persistent;
  sources.assign(n, PredictionSource{});
  std::vector<const TransientCandidate*> best(n, nullptr);
  for (const auto& s : sessions) {
    if (s.center >= n || classes[s.center] != EntityClass::human) {
      throw std::invalid_argument("combine_predictions: session center " + std::to_string(s.center) +
                                  " is not a human");
    }
    const auto& preds = *s.predictions;
    out[s.center] = *preds[s.center];
    sources[s.center] = {true, s.center};
    for (std::size_t l : s.graph->outward_ids()) {
      if (classes[l] != EntityClass::object) continue;
      const auto* cur = best[l];
      if (!cur || s.score > cur->score || (s.score == cur->score && s.center < cur->center)) best[l] = &s;
    }
  }
  for (std::size_t l = 0; l < n; ++l) {
    if (!best[l]) continue;
    out[l] = *(*best[l]->predictions)[l];
    sources[l] = {true, best[l]->center};
  }
}

StepResult model_step(ad::Tape& tape, const PtdModel& model, ModelState& state, const std::vector<ad::Var>& features,
                      const StepOptions& options) {
  const ModelConfig& cfg = model.config;
  const std::size_t n = state.classes.size();
  if (features.size() != n) {
    throw std::invalid_argument("model_step: got " + std::to_string(features.size()) + " entities, expected " +
                                std::to_string(n));
  }
  const std::size_t step = ++state.step;
  StepResult result;
  if (options.diagnostics) result.diagnostics.emplace();

  // (1) persistent channel with last step's transient messages.
  // Displacement since the previous input; zero on the first step.
  std::vector<ad::Var> motion(n);
  for (std::size_t i = 0; i < n; ++i) {
    motion[i] = state.previous.empty() ? tape.constant(Tensor(features[i].shape(), 0.0))
                                       : ad::sub(features[i], state.previous[i]);
  }
  state.previous = features;

  auto incoming = std::move(state.pending_message);
  state.pending_message.assign(n, std::nullopt);
  auto pers = persistent_step(tape, model.params.persistent, cfg, state.persistent, features, motion, incoming);
  if (result.diagnostics) {
    result.diagnostics->persistent_attention = std::move(pers.attention);
    result.diagnostics->consumed_incoming = std::move(pers.consumed_incoming);
  }

  // (2)-(3) switches in ascending human order, then session life cycles.
  std::map<std::size_t, double> scores;
  for (auto& [human, sw] : state.switches) {
    const ad::Var h_p = ad::slice(state.persistent.hidden, 0, human, human + 1);
    auto s = switch_step(tape, model.params.sw, cfg, sw, h_p, features, motion, state.classes);
    std::optional<bool> forced;
    if (options.override_switch) forced = options.override_switch(step, human);
    const SwitchEvent e = forced ? switch_force(sw, *forced) : switch_decide(sw, sw.last_score, cfg.switch_threshold);
    result.switches.push_back({human, s.score, sw.on, e});
    scores[human] = sw.last_score;
    if (result.diagnostics) {
      result.diagnostics->switch_attention[human] = std::move(s.attention);
      result.diagnostics->gamma[human] = s.gamma;
    }
    if (e == SwitchEvent::spawn) {
      if (state.sessions.count(human)) throw std::logic_error("spawn_session: session already live");
      state.sessions.emplace(human, spawn_session(tape, cfg, state.classes, human, step));
    } else if (e == SwitchEvent::terminate) {
      state.sessions.at(human).live = false;
      state.sessions.erase(human);
    }
  }

  // (4) live sessions, each fed this step's m_{P->T}.
  std::vector<TransientStepOutput> outputs;
  outputs.reserve(state.sessions.size());
  std::vector<TransientCandidate> candidates;
  for (auto& [human, session] : state.sessions) {
    outputs.push_back(transient_step(tape, model.params.transient, cfg, session, features, motion, state.classes,
                                     *pers.to_transient[human]));
    const auto& o = outputs.back();
    state.pending_message[human] = o.to_persistent;
    candidates.push_back({human, scores.at(human), &session.graph, &o.predictions});
    if (result.diagnostics) {
      SessionDiagnostics d;
      d.center = human;
      d.inward = session.graph.inward_ids();
      d.outward = session.graph.outward_ids();
      for (double v : session.graph.distances) d.distances_mm.push_back(v / cfg.coordinate_scale);
      d.inward_attention = o.inward_attention;
      d.from_persistent_norm = o.from_persistent_norm;
      d.to_persistent_norm = o.to_persistent_norm;
      result.diagnostics->sessions.push_back(std::move(d));
    }
  }

  // (5) combination.
  combine_predictions(pers.predictions, state.classes, candidates, result.predictions, result.sources);
  return result;
}

std::vector<ad::Var> scene_step_rows(ad::Tape& tape, const Scene& scene, std::size_t step0, double scale) {
  std::vector<ad::Var> rows;
  rows.reserve(scene.entities.size());
  for (const auto& e : scene.entities) {
    const auto& pts = e.frames.at(step0);
    Tensor t({1, 3 * pts.size()});
    for (std::size_t k = 0; k < pts.size(); ++k) {
      t[3 * k] = pts[k].x * scale;
      t[3 * k + 1] = pts[k].y * scale;
      t[3 * k + 2] = pts[k].z * scale;
    }
    rows.push_back(tape.constant(std::move(t)));
  }
  return rows;
}

Rollout rollout(ad::Tape& tape, const PtdModel& model, const Scene& scene, const StepOptions& options) {
  const ModelConfig& cfg = model.config;
  const std::size_t T = cfg.observe_steps, L = cfg.predict_steps;
  if (scene.steps() < T) {
    throw std::invalid_argument("rollout: scene '" + scene.scene_id + "' has " + std::to_string(scene.steps()) +
                                " steps, fewer than the " + std::to_string(T) + " observed");
  }
  std::vector<EntityClass> classes;
  for (const auto& e : scene.entities) classes.push_back(e.cls);
  ModelState state = init_model_state(tape, model, classes);

  Rollout out;
  out.observe = T;
  out.horizon = L;
  for (const auto& [h, sw] : state.switches) out.humans.push_back(h);

  std::vector<ad::Var> features;
  for (std::size_t t = 1; t <= T + L; ++t) {
    if (t <= T) features = scene_step_rows(tape, scene, t - 1, cfg.coordinate_scale);
    StepResult r = model_step(tape, model, state, features, options);
    if (!state.switches.empty()) {
      std::vector<ad::Var> sc;
      std::vector<std::uint8_t> on;
      for (const auto& s : r.switches) {
        sc.push_back(s.score);
        on.push_back(s.on ? 1 : 0);
      }
      out.scores.push_back(std::move(sc));
      out.decisions.push_back(std::move(on));
    }
    if (r.diagnostics) out.diagnostics.push_back(std::move(*r.diagnostics));
    if (t >= T && t < T + L) {
      out.predictions.push_back(r.predictions);
      out.sources.push_back(r.sources);
    }
    features = std::move(r.predictions);
  }
  return out;
}

}  // namespace ptd
