#include <gtest/gtest.h>

#include "ptd/gradcheck.hpp"
#include "ptd/micro.hpp"
#include "ptd/transient.hpp"
#include "support.hpp"

using namespace ptd;
using namespace ptd::test_support;

namespace {

struct Fixture {
  ModelConfig cfg = small_config();
  ad::ParameterStore store;
  TransientParams params;
  Scene scene;

  explicit Fixture(std::uint64_t seed) : scene(micro_scene(seed)) {
    nn::Rng rng(seed);
    params = make_transient_params(store, cfg, rng);
  }

  ad::Var from_persistent(ad::Tape& tape, double v = 0.1) const {
    return tape.constant(Tensor({1, cfg.hidden_dim}, v));
  }
};

}  // namespace

TEST(TransientGraph, ThresholdsAreInclusive) {
  const std::vector<Vec3> c{{0, 0, 0}, {50, 0, 0}, {100, 0, 0}, {0, 300, 0}, {0, 0, 500}, {600, 0, 0}};
  const std::vector<EntityClass> cls{EntityClass::human, EntityClass::object, EntityClass::object,
                                     EntityClass::human, EntityClass::object, EntityClass::object};
  const auto g = build_transient_graph(c, cls, 0, 500.0, 100.0);
  EXPECT_EQ(g.leaves, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(g.inward_ids(), (std::vector<std::size_t>{1, 2, 3, 4}));
  EXPECT_EQ(g.outward_ids(), (std::vector<std::size_t>{1, 2}));
  EXPECT_DOUBLE_EQ(g.distances[2], 300.0);
  EXPECT_TRUE(g.has_outward(2));
  EXPECT_FALSE(g.has_outward(3));
  EXPECT_FALSE(g.has_outward(0));
}

TEST(TransientGraph, OutwardIsSubsetOfInward) {
  const auto scene = micro_scene(1);
  for (std::size_t t = 0; t < scene.steps(); ++t) {
    const auto g = build_transient_graph(scene.features_at(t), 0, 500.0, 100.0);
    for (std::size_t k = 0; k < g.leaves.size(); ++k) EXPECT_LE(g.outward[k], g.inward[k]);
    EXPECT_EQ(g.outward_ids(), (std::vector<std::size_t>{1}));
    EXPECT_EQ(g.inward_ids(), (std::vector<std::size_t>{1, 2}));
  }
}

TEST(TransientGraph, RejectsBadArguments) {
  const std::vector<Vec3> c{{0, 0, 0}, {1, 0, 0}};
  const std::vector<EntityClass> cls{EntityClass::human, EntityClass::object};
  EXPECT_THROW(build_transient_graph(c, cls, 0, 100.0, 500.0), std::invalid_argument);
  EXPECT_THROW(build_transient_graph(c, cls, 1, 500.0, 100.0), std::invalid_argument);
  EXPECT_THROW(build_transient_graph(c, cls, 2, 500.0, 100.0), std::invalid_argument);
}

TEST(Transient, SpawnStartsFromZeroState) {
  Fixture f(2);
  ad::Tape tape(&f.store);
  const auto s = spawn_session(tape, f.cfg, classes_of(f.scene), 0, 7);
  EXPECT_TRUE(s.live);
  EXPECT_EQ(s.start_step, 7u);
  EXPECT_EQ(s.center, 0u);
  for (double v : s.center_hidden.value().values()) EXPECT_EQ(v, 0.0);
  for (const auto& h : s.leaf_hidden)
    for (double v : h.value().values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(spawn_session(tape, f.cfg, classes_of(f.scene), 1, 0), std::invalid_argument);
}

TEST(Transient, OnlyOutwardLeavesUpdateAndPredict) {
  Fixture f(3);
  ad::Tape tape(&f.store);
  auto s = spawn_session(tape, f.cfg, classes_of(f.scene), 0, 1);
  for (std::size_t t = 0; t < 3; ++t) {
    const auto frozen = s.leaf_hidden[2].value();
    const auto in = step_inputs(tape, f.scene, t, f.cfg.coordinate_scale);
    const auto out = transient_step(tape, f.params, f.cfg, s, in.features, in.motion, classes_of(f.scene),
                                    f.from_persistent(tape));
    EXPECT_EQ(s.leaf_hidden[2].value(), frozen);
    EXPECT_TRUE(out.predictions[0].has_value());
    EXPECT_TRUE(out.predictions[1].has_value());
    EXPECT_FALSE(out.predictions[2].has_value());
    EXPECT_EQ(s.leaf_touched, (std::vector<std::uint8_t>{0, 1, 0}));
    EXPECT_EQ(out.inward_attention.size(), 2u);
    EXPECT_NEAR(out.inward_attention[0] + out.inward_attention[1], 1.0, 1e-12);
    EXPECT_EQ(out.to_persistent.shape(), (Shape{1, f.cfg.message_dim}));
  }
}

TEST(Transient, NoInwardLeafMeansZeroMessage) {
  Fixture f(4);
  Scene alone = f.scene;
  alone.entities.resize(1);
  ad::Tape tape(&f.store);
  auto s = spawn_session(tape, f.cfg, classes_of(alone), 0, 1);
  const auto in = step_inputs(tape, alone, 0, f.cfg.coordinate_scale);
  const auto out =
      transient_step(tape, f.params, f.cfg, s, in.features, in.motion, classes_of(alone), f.from_persistent(tape));
  EXPECT_TRUE(out.inward_attention.empty());
  EXPECT_TRUE(out.predictions[0].has_value());
}

TEST(Transient, ZeroReadoutsReturnCurrentGlobalFeatures) {
  Fixture f(5);
  for (const auto& head : f.params.readout) {
    f.store[head.layers.back().weight].value.fill(0.0);
    f.store[head.layers.back().bias].value.fill(0.0);
  }
  ad::Tape tape(&f.store);
  auto s = spawn_session(tape, f.cfg, classes_of(f.scene), 0, 1);
  const auto in = step_inputs(tape, f.scene, 1, f.cfg.coordinate_scale);
  const auto out = transient_step(tape, f.params, f.cfg, s, in.features, in.motion, classes_of(f.scene),
                                  f.from_persistent(tape));
  for (std::size_t i : {0, 1}) {
    const auto& got = out.predictions[i]->value();
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], in.features[i].value()[k], 1e-12);
  }
}

TEST(Transient, StepOnDeadSessionThrows) {
  Fixture f(6);
  ad::Tape tape(&f.store);
  auto s = spawn_session(tape, f.cfg, classes_of(f.scene), 0, 1);
  s.live = false;
  const auto in = step_inputs(tape, f.scene, 0, f.cfg.coordinate_scale);
  EXPECT_THROW(transient_step(tape, f.params, f.cfg, s, in.features, in.motion, classes_of(f.scene),
                              f.from_persistent(tape)),
               std::logic_error);
}

TEST(TransientProperty, TranslationEquivariance) {
  Fixture f(7);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 shift{u(rng), u(rng), u(rng)};
    ad::Tape tape(&f.store);
    auto a = spawn_session(tape, f.cfg, classes_of(f.scene), 0, 1);
    auto b = spawn_session(tape, f.cfg, classes_of(f.scene), 0, 1);
    for (std::size_t t = 0; t < f.scene.steps(); ++t) {
      const auto in_a = step_inputs(tape, f.scene, t, f.cfg.coordinate_scale);
      const auto in_b = step_inputs(tape, f.scene, t, f.cfg.coordinate_scale, shift);
      const auto oa = transient_step(tape, f.params, f.cfg, a, in_a.features, in_a.motion, classes_of(f.scene),
                                     f.from_persistent(tape));
      const auto ob = transient_step(tape, f.params, f.cfg, b, in_b.features, in_b.motion, classes_of(f.scene),
                                     f.from_persistent(tape));
      for (std::size_t k = 0; k < f.cfg.hidden_dim; ++k) {
        ASSERT_NEAR(a.center_hidden.value()[k], b.center_hidden.value()[k], 1e-9);
        ASSERT_NEAR(a.leaf_hidden[1].value()[k], b.leaf_hidden[1].value()[k], 1e-9);
      }
      for (std::size_t k = 0; k < f.cfg.message_dim; ++k)
        ASSERT_NEAR(oa.to_persistent.value()[k], ob.to_persistent.value()[k], 1e-9);
      for (std::size_t i : {0, 1}) {
        const auto& pa = oa.predictions[i]->value();
        const auto& pb = ob.predictions[i]->value();
        for (std::size_t k = 0; k < pa.size(); k += 3) {
          ASSERT_NEAR(pb[k] - shift.x, pa[k], 1e-9);
          ASSERT_NEAR(pb[k + 1] - shift.y, pa[k + 1], 1e-9);
          ASSERT_NEAR(pb[k + 2] - shift.z, pa[k + 2], 1e-9);
        }
      }
    }
  }
}

TEST(Transient, GradientsMatchFiniteDifferences) {
  Fixture f(9);
  const auto res = ad::check_parameter_gradients(
      f.store,
      [&](ad::Tape& tape) {
        auto s = spawn_session(tape, f.cfg, classes_of(f.scene), 0, 1);
        ad::Var loss = tape.constant(Tensor::scalar(0.0));
        for (std::size_t t = 0; t < 3; ++t) {
          const auto in = step_inputs(tape, f.scene, t, f.cfg.coordinate_scale);
          const auto out = transient_step(tape, f.params, f.cfg, s, in.features, in.motion, classes_of(f.scene),
                                          f.from_persistent(tape, 0.3));
          const auto next = scene_step_rows(tape, f.scene, t + 1, f.cfg.coordinate_scale);
          for (std::size_t i : {0, 1}) loss = loss + ad::squared_l2(*out.predictions[i] - next[i]);
          loss = loss + ad::sum(ad::mul(out.to_persistent, out.to_persistent));
        }
        return loss;
      },
      1e-6);
  EXPECT_LT(res.max_rel_error, 1e-5) << res.worst;
}
