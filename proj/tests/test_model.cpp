#include <gtest/gtest.h>

#include "ptd/micro.hpp"
#include "ptd/model.hpp"
#include "ptd/synth.hpp"
#include "support.hpp"

using namespace ptd;
using namespace ptd::test_support;

namespace {

TransientGraph star(std::size_t center, const std::vector<std::size_t>& outward, std::size_t n) {
  TransientGraph g;
  g.center = center;
  for (std::size_t l = 0; l < n; ++l) {
    if (l == center) continue;
    const bool out = std::find(outward.begin(), outward.end(), l) != outward.end();
    g.leaves.push_back(l);
    g.distances.push_back(out ? 0.05 : 1.0);
    g.inward.push_back(out ? 1 : 0);
    g.outward.push_back(out ? 1 : 0);
  }
  return g;
}

std::vector<std::optional<ad::Var>> filled(ad::Tape& tape, std::size_t n, double value) {
  std::vector<std::optional<ad::Var>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(tape.constant(Tensor::row({value, value, value})));
  return out;
}

void zero_heads(PtdModel& model) {
  auto zero_last = [&](const nn::MlpParams& m) {
    model.store[m.layers.back().weight].value.fill(0.0);
    model.store[m.layers.back().bias].value.fill(0.0);
  };
  for (const auto& h : model.params.persistent.prediction) zero_last(h);
  for (const auto& h : model.params.transient.readout) zero_last(h);
}

Scene quiet_scene() {
  GenConfig g;
  g.episode_rate = 0.0;
  g.steps = 12;
  g.min_humans = g.max_humans = 2;
  return generate_scene(g, 3);
}

ModelConfig rollout_config(std::size_t observe, std::size_t predict) {
  ModelConfig cfg = small_config();
  cfg.observe_steps = observe;
  cfg.predict_steps = predict;
  return cfg;
}

}  // namespace

TEST(Combine, NoSessionsKeepsPersistent) {
  ad::Tape tape;
  const std::vector<EntityClass> cls{EntityClass::human, EntityClass::object};
  const std::vector<ad::Var> pers{tape.constant(Tensor::row({1, 1, 1})), tape.constant(Tensor::row({2, 2, 2}))};
  std::vector<ad::Var> out;
  std::vector<PredictionSource> src;
  combine_predictions(pers, cls, {}, out, src);
  EXPECT_EQ(out[0].id(), pers[0].id());
  EXPECT_EQ(out[1].id(), pers[1].id());
  EXPECT_EQ(src, (std::vector<PredictionSource>(2)));
}

TEST(Combine, HigherScoringSessionWinsSharedObject) {
  ad::Tape tape;
  const std::vector<EntityClass> cls{EntityClass::human, EntityClass::human, EntityClass::object, EntityClass::object};
  std::vector<ad::Var> pers;
  for (int i = 0; i < 4; ++i) pers.push_back(tape.constant(Tensor::row({0, 0, 0})));
  const auto g0 = star(0, {2, 3}, 4), g1 = star(1, {2}, 4);
  const auto p0 = filled(tape, 4, 7.0), p1 = filled(tape, 4, 9.0);
  std::vector<ad::Var> out;
  std::vector<PredictionSource> src;
  combine_predictions(pers, cls, {{0, 0.7, &g0, &p0}, {1, 0.9, &g1, &p1}}, out, src);
  EXPECT_EQ(src[0], (PredictionSource{true, 0}));
  EXPECT_EQ(src[1], (PredictionSource{true, 1}));
  EXPECT_EQ(src[2], (PredictionSource{true, 1}));
  EXPECT_EQ(src[3], (PredictionSource{true, 0}));
  EXPECT_EQ(out[2].value()[0], 9.0);
  EXPECT_EQ(out[3].value()[0], 7.0);
}

TEST(Combine, TiesGoToLowerCenter) {
  ad::Tape tape;
  const std::vector<EntityClass> cls{EntityClass::human, EntityClass::human, EntityClass::object};
  std::vector<ad::Var> pers(3, tape.constant(Tensor::row({0, 0, 0})));
  const auto g0 = star(0, {2}, 3), g1 = star(1, {2}, 3);
  const auto p0 = filled(tape, 3, 1.0), p1 = filled(tape, 3, 2.0);
  std::vector<ad::Var> out;
  std::vector<PredictionSource> src;
  combine_predictions(pers, cls, {{1, 0.6, &g1, &p1}, {0, 0.6, &g0, &p0}}, out, src);
  EXPECT_EQ(src[2], (PredictionSource{true, 0}));
}

TEST(Combine, HumanLeafKeepsItsOwnPrediction) {
  ad::Tape tape;
  const std::vector<EntityClass> cls{EntityClass::human, EntityClass::human};
  const std::vector<ad::Var> pers{tape.constant(Tensor::row({0, 0, 0})), tape.constant(Tensor::row({5, 5, 5}))};
  const auto g0 = star(0, {1}, 2);
  const auto p0 = filled(tape, 2, 1.0);
  std::vector<ad::Var> out;
  std::vector<PredictionSource> src;
  combine_predictions(pers, cls, {{0, 0.8, &g0, &p0}}, out, src);
  EXPECT_EQ(src[1], PredictionSource{});
  EXPECT_EQ(out[1].value()[0], 5.0);
}

TEST(Model, FarApartEntitiesStayPersistent) {
  const auto model = PtdModel::create(rollout_config(6, 6));
  const auto scene = quiet_scene();
  ad::Tape tape(&model.store);
  const auto r = rollout(tape, model, scene);
  ASSERT_EQ(r.humans.size(), 2u);
  ASSERT_EQ(r.scores.size(), 12u);
  for (const auto& step : r.decisions)
    for (auto on : step) EXPECT_EQ(on, 0);
  for (const auto& step : r.sources)
    for (const auto& s : step) EXPECT_FALSE(s.transient);
}

TEST(Model, PersistentOnlyNeverSpawns) {
  auto cfg = micro_config(1);
  cfg.mode = ModelMode::persistent_only;
  const auto model = PtdModel::create(cfg);
  StepOptions opts;
  opts.override_switch = micro_switch_schedule;
  opts.diagnostics = true;
  ad::Tape tape(&model.store);
  const auto r = rollout(tape, model, micro_scene(1), opts);
  EXPECT_TRUE(r.humans.empty());
  EXPECT_TRUE(r.scores.empty());
  for (const auto& d : r.diagnostics) EXPECT_TRUE(d.sessions.empty());
  for (const auto& step : r.sources)
    for (const auto& s : step) EXPECT_FALSE(s.transient);
}

TEST(Model, TransientMessageArrivesOneStepLater) {
  const auto model = PtdModel::create(micro_config(2));
  StepOptions opts;
  opts.override_switch = micro_switch_schedule;
  opts.diagnostics = true;
  ad::Tape tape(&model.store);
  const auto r = rollout(tape, model, micro_scene(2), opts);
  ASSERT_EQ(r.diagnostics.size(), 5u);
  auto row_norm = [](const Tensor& t, std::size_t row) {
    double s = 0.0;
    for (std::size_t c = 0; c < t.cols(); ++c) s += t.at(row, c) * t.at(row, c);
    return s;
  };
  // Session live on steps 2..4; its message is consumed on steps 3..5.
  const std::vector<bool> expect{false, false, true, true, true};
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_EQ(row_norm(r.diagnostics[t].consumed_incoming, 0) > 0.0, expect[t]) << "step " << t + 1;
    for (std::size_t obj : {1, 2}) EXPECT_EQ(row_norm(r.diagnostics[t].consumed_incoming, obj), 0.0);
    EXPECT_EQ(r.diagnostics[t].sessions.size(), (t >= 1 && t <= 3) ? 1u : 0u);
  }
  // Step 4 is the first predicted step and comes from the live session.
  EXPECT_EQ(r.sources[0][0], (PredictionSource{true, 0}));
  EXPECT_EQ(r.sources[0][1], (PredictionSource{true, 0}));
  EXPECT_EQ(r.sources[0][2], PredictionSource{});
}

TEST(Model, ZeroHorizonOnlyScores) {
  const auto model = PtdModel::create(rollout_config(5, 0));
  ad::Tape tape(&model.store);
  const auto r = rollout(tape, model, micro_scene(3));
  EXPECT_TRUE(r.predictions.empty());
  EXPECT_EQ(r.scores.size(), 5u);
}

TEST(Model, ZeroHeadsFreezeTheScene) {
  auto model = PtdModel::create(micro_config(4));
  zero_heads(model);
  StepOptions opts;
  opts.override_switch = micro_switch_schedule;
  const auto scene = micro_scene(4);
  ad::Tape tape(&model.store);
  const auto r = rollout(tape, model, scene, opts);
  const auto last = scene_step_rows(tape, scene, 2, model.config.coordinate_scale);
  for (const auto& step : r.predictions)
    for (std::size_t i = 0; i < last.size(); ++i)
      for (std::size_t k = 0; k < last[i].size(); ++k) EXPECT_NEAR(step[i].value()[k], last[i].value()[k], 1e-12);
}

TEST(Model, ShortSceneIsRejected) {
  const auto model = PtdModel::create(rollout_config(6, 2));
  ad::Tape tape(&model.store);
  EXPECT_THROW(rollout(tape, model, micro_scene(5)), std::invalid_argument);
}

TEST(Model, RolloutsAreBitwiseReproducible) {
  std::vector<Tensor> runs[2];
  for (auto& run : runs) {
    const auto model = PtdModel::create(micro_config(6));
    ad::Tape tape(&model.store);
    const auto r = rollout(tape, model, micro_scene(6));
    for (const auto& step : r.predictions)
      for (const auto& v : step) run.push_back(v.value());
    for (const auto& step : r.scores)
      for (const auto& v : step) run.push_back(v.value());
  }
  EXPECT_EQ(runs[0], runs[1]);
}
