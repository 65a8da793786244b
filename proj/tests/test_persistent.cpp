#include <gtest/gtest.h>

#include "ptd/gradcheck.hpp"
#include "ptd/micro.hpp"
#include "ptd/persistent.hpp"
#include "support.hpp"

using namespace ptd;
using namespace ptd::test_support;

namespace {

Scene take_entities(Scene scene, std::size_t count) {
  scene.entities.resize(count);
  std::map<int, std::vector<std::uint8_t>> labels;
  for (const auto& e : scene.entities)
    if (scene.switch_labels.count(e.id)) labels[e.id] = scene.switch_labels.at(e.id);
  scene.switch_labels = labels;
  return scene;
}

}  // namespace

TEST(Persistent, AbsentIncomingFeedsZeroSlot) {
  const auto cfg = small_config();
  ad::ParameterStore store;
  nn::Rng rng(1);
  const auto p = make_persistent_params(store, cfg, rng);
  const auto scene = micro_scene(1);
  ad::Tape tape(&store);
  auto state = init_persistent_state(tape, cfg, classes_of(scene));
  const auto in = step_inputs(tape, scene, 0, cfg.coordinate_scale);
  const std::vector<std::optional<ad::Var>> none(scene.entities.size());
  const auto out = persistent_step(tape, p, cfg, state, in.features, in.motion, none);
  ASSERT_EQ(out.consumed_incoming.shape(), (Shape{scene.entities.size(), cfg.message_dim}));
  for (double v : out.consumed_incoming.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(out.predictions.size(), scene.entities.size());
  EXPECT_TRUE(out.to_transient[0].has_value());
  EXPECT_FALSE(out.to_transient[1].has_value());
}

TEST(Persistent, IncomingMessageIsConsumedByItsHuman) {
  const auto cfg = small_config();
  ad::ParameterStore store;
  nn::Rng rng(2);
  const auto p = make_persistent_params(store, cfg, rng);
  const auto scene = micro_scene(2);
  ad::Tape tape(&store);
  auto with = init_persistent_state(tape, cfg, classes_of(scene));
  auto without = init_persistent_state(tape, cfg, classes_of(scene));
  const auto in = step_inputs(tape, scene, 0, cfg.coordinate_scale);
  std::vector<std::optional<ad::Var>> incoming(scene.entities.size());
  incoming[0] = tape.constant(Tensor({1, cfg.message_dim}, 0.25));
  const auto a = persistent_step(tape, p, cfg, with, in.features, in.motion, incoming);
  const auto b = persistent_step(tape, p, cfg, without, in.features, in.motion,
                                 std::vector<std::optional<ad::Var>>(scene.entities.size()));
  for (std::size_t c = 0; c < cfg.message_dim; ++c) EXPECT_EQ(a.consumed_incoming.at(0, c), 0.25);
  EXPECT_NE(a.predictions[0].value(), b.predictions[0].value());
  // Objects do not see the message directly in the same step.
  EXPECT_EQ(a.predictions[1].value(), b.predictions[1].value());
}

TEST(Persistent, ObjectsRejectIncomingMessages) {
  const auto cfg = small_config();
  ad::ParameterStore store;
  nn::Rng rng(3);
  const auto p = make_persistent_params(store, cfg, rng);
  const auto scene = micro_scene(3);
  ad::Tape tape(&store);
  auto state = init_persistent_state(tape, cfg, classes_of(scene));
  const auto in = step_inputs(tape, scene, 0, cfg.coordinate_scale);
  std::vector<std::optional<ad::Var>> incoming(scene.entities.size());
  incoming[1] = tape.constant(Tensor({1, cfg.message_dim}, 1.0));
  EXPECT_THROW(persistent_step(tape, p, cfg, state, in.features, in.motion, incoming), std::invalid_argument);
}

TEST(Persistent, AttentionRowsExcludeSelf) {
  const auto cfg = small_config();
  ad::ParameterStore store;
  nn::Rng rng(4);
  const auto p = make_persistent_params(store, cfg, rng);
  const auto scene = micro_scene(4);
  const std::size_t n = scene.entities.size();
  ad::Tape tape(&store);
  auto state = init_persistent_state(tape, cfg, classes_of(scene));
  const auto in = step_inputs(tape, scene, 0, cfg.coordinate_scale);
  const auto out =
      persistent_step(tape, p, cfg, state, in.features, in.motion, std::vector<std::optional<ad::Var>>(n));
  ASSERT_EQ(out.attention.shape(), (Shape{n, n}));
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(out.attention.at(i, i), 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += out.attention.at(i, j);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Persistent, TwoEntitiesAttendToEachOtherFully) {
  const auto cfg = small_config();
  ad::ParameterStore store;
  nn::Rng rng(5);
  const auto p = make_persistent_params(store, cfg, rng);
  const auto scene = take_entities(micro_scene(5), 2);
  ad::Tape tape(&store);
  auto state = init_persistent_state(tape, cfg, classes_of(scene));
  const auto in = step_inputs(tape, scene, 0, cfg.coordinate_scale);
  const auto out =
      persistent_step(tape, p, cfg, state, in.features, in.motion, std::vector<std::optional<ad::Var>>(2));
  EXPECT_EQ(out.attention.at(0, 1), 1.0);
  EXPECT_EQ(out.attention.at(1, 0), 1.0);
}

TEST(Persistent, SingleEntityGetsZeroMessage) {
  const auto cfg = small_config();
  ad::ParameterStore store;
  nn::Rng rng(6);
  const auto p = make_persistent_params(store, cfg, rng);
  const auto scene = take_entities(micro_scene(6), 1);
  ad::Tape tape(&store);
  auto state = init_persistent_state(tape, cfg, classes_of(scene));
  const auto in = step_inputs(tape, scene, 0, cfg.coordinate_scale);
  const auto out =
      persistent_step(tape, p, cfg, state, in.features, in.motion, std::vector<std::optional<ad::Var>>(1));
  EXPECT_EQ(out.attention.shape(), (Shape{1, 1}));
  EXPECT_EQ(out.attention[0], 0.0);
  EXPECT_EQ(out.predictions.size(), 1u);
  EXPECT_TRUE(out.predictions[0].value().all_finite());
}

TEST(Persistent, ZeroHeadsPredictNoDisplacement) {
  const auto cfg = small_config();
  ad::ParameterStore store;
  nn::Rng rng(7);
  const auto p = make_persistent_params(store, cfg, rng);
  for (const auto& head : p.prediction) {
    store[head.layers.back().weight].value.fill(0.0);
    store[head.layers.back().bias].value.fill(0.0);
  }
  const auto scene = micro_scene(7);
  ad::Tape tape(&store);
  auto state = init_persistent_state(tape, cfg, classes_of(scene));
  const auto in = step_inputs(tape, scene, 1, cfg.coordinate_scale);
  const auto out = persistent_step(tape, p, cfg, state, in.features, in.motion,
                                   std::vector<std::optional<ad::Var>>(scene.entities.size()));
  for (std::size_t i = 0; i < scene.entities.size(); ++i) EXPECT_EQ(out.predictions[i].value(), in.features[i].value());
}

TEST(Persistent, IdenticalSeedsGiveIdenticalOutputs) {
  const auto cfg = small_config();
  const auto scene = micro_scene(8);
  std::vector<Tensor> runs[2];
  for (auto& run : runs) {
    ad::ParameterStore store;
    nn::Rng rng(8);
    const auto p = make_persistent_params(store, cfg, rng);
    ad::Tape tape(&store);
    auto state = init_persistent_state(tape, cfg, classes_of(scene));
    for (std::size_t t = 0; t < 3; ++t) {
      const auto in = step_inputs(tape, scene, t, cfg.coordinate_scale);
      const auto out = persistent_step(tape, p, cfg, state, in.features, in.motion,
                                       std::vector<std::optional<ad::Var>>(scene.entities.size()));
      for (const auto& v : out.predictions) run.push_back(v.value());
    }
  }
  EXPECT_EQ(runs[0], runs[1]);
}

TEST(Persistent, GradientsMatchFiniteDifferences) {
  const auto cfg = small_config();
  ad::ParameterStore store;
  nn::Rng rng(9);
  const auto p = make_persistent_params(store, cfg, rng);
  const auto scene = micro_scene(9);
  const auto res = ad::check_parameter_gradients(
      store,
      [&](ad::Tape& tape) {
        auto state = init_persistent_state(tape, cfg, classes_of(scene));
        ad::Var loss = tape.constant(Tensor::scalar(0.0));
        for (std::size_t t = 0; t < 2; ++t) {
          const auto in = step_inputs(tape, scene, t, cfg.coordinate_scale);
          std::vector<std::optional<ad::Var>> incoming(scene.entities.size());
          incoming[0] = tape.constant(Tensor({1, cfg.message_dim}, 0.1));
          const auto out = persistent_step(tape, p, cfg, state, in.features, in.motion, incoming);
          const auto next = scene_step_rows(tape, scene, t + 1, cfg.coordinate_scale);
          for (std::size_t i = 0; i < next.size(); ++i)
            loss = loss + ad::squared_l2(out.predictions[i] - next[i]);
          loss = loss + ad::sum(ad::mul(*out.to_transient[0], *out.to_transient[0]));
        }
        return loss;
      },
      1e-6);
  EXPECT_LT(res.max_rel_error, 1e-5) << res.worst;
  EXPECT_EQ(res.checked, store.scalar_count());
}
