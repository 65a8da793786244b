#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ptd/micro.hpp"
#include "ptd/switch.hpp"
#include "support.hpp"

using namespace ptd;
using namespace ptd::test_support;

TEST(Discount, ExactValues) {
  EXPECT_EQ(discount(0.002, {0.0}), 1.0);
  EXPECT_NEAR(discount(0.001, {693.14718055994530942}), 0.5, 1e-15);
  EXPECT_NEAR(discount(0.001, {2000.0, 693.14718055994530942, 900.0}), 0.5, 1e-15);
  EXPECT_EQ(discount(0.001, {}), 0.0);
  EXPECT_EQ(discount(0.0, {1e6}), 1.0);
}

TEST(Discount, NonIncreasingInDistance) {
  double last = 1.0;
  for (double d = 0.0; d < 5000.0; d += 37.5) {
    const double g = discount(0.002, {d});
    EXPECT_LE(g, last);
    last = g;
  }
}

TEST(Switch, BetaReparameterizationRoundTrips) {
  ModelConfig cfg = small_config();
  ad::ParameterStore store;
  nn::Rng rng(1);
  const auto p = make_switch_params(store, cfg, rng);
  EXPECT_NEAR(beta_per_mm(store, p), cfg.beta_init_per_mm, 1e-15);
  store[p.beta_raw].value[0] = beta_raw_for(0.0123);
  EXPECT_NEAR(beta_per_mm(store, p), 0.0123, 1e-15);
  store[p.beta_raw].value[0] = -50.0;
  EXPECT_GE(beta_per_mm(store, p), 0.0);
}

TEST(SwitchDecide, InclusiveThresholdAndEvents) {
  SwitchState s;
  const std::vector<double> scores{0.2, 0.6, 0.7, 0.4, 0.5, 0.49, 0.5};
  const std::vector<SwitchEvent> expect{SwitchEvent::none,      SwitchEvent::spawn, SwitchEvent::none,
                                        SwitchEvent::terminate, SwitchEvent::spawn, SwitchEvent::terminate,
                                        SwitchEvent::spawn};
  for (std::size_t k = 0; k < scores.size(); ++k) EXPECT_EQ(switch_decide(s, scores[k]), expect[k]) << k;
  EXPECT_TRUE(s.on);
}

TEST(SwitchDecide, JustBelowThresholdNeverSpawns) {
  SwitchState s;
  for (int k = 0; k < 100; ++k) EXPECT_EQ(switch_decide(s, 0.49), SwitchEvent::none);
  EXPECT_FALSE(s.on);
  EXPECT_EQ(switch_decide(s, std::nextafter(0.5, 0.0)), SwitchEvent::none);
}

TEST(SwitchDecide, EventsAlternateOnRandomSequences) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    SwitchState s;
    SwitchEvent last = SwitchEvent::terminate;
    for (int k = 0; k < 50; ++k) {
      const bool was_on = s.on;
      const auto e = switch_decide(s, u(rng));
      if (e == SwitchEvent::none) {
        ASSERT_EQ(s.on, was_on);
        continue;
      }
      ASSERT_NE(e, last);
      ASSERT_EQ(e == SwitchEvent::spawn, s.on);
      last = e;
    }
  }
}

TEST(SwitchForce, UsesTheSameBookkeeping) {
  SwitchState s;
  EXPECT_EQ(switch_force(s, false), SwitchEvent::none);
  EXPECT_EQ(switch_force(s, true), SwitchEvent::spawn);
  EXPECT_EQ(switch_force(s, true), SwitchEvent::none);
  EXPECT_EQ(switch_force(s, false), SwitchEvent::terminate);
}

namespace {

struct SwitchValues {
  double score = 0.0;
  double gamma = 0.0;
  double nearest = 0.0;
  Tensor attention;
};

struct SwitchRun {
  SwitchValues out;
  std::vector<double> history;
};

SwitchRun run_switch(const Scene& scene, std::uint64_t seed, std::size_t step0, bool random_params = false,
                     double coordinate_scale = ModelConfig{}.coordinate_scale) {
  ModelConfig cfg = small_config();
  cfg.coordinate_scale = coordinate_scale;
  ad::ParameterStore store;
  nn::Rng rng(seed);
  const auto p = make_switch_params(store, cfg, rng);
  if (random_params) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (auto& prm : store)
      for (auto& v : prm.value.values()) v = u(rng);
  }
  ad::Tape tape(&store);
  auto state = init_switch_state(tape, cfg, 0);
  const auto in = step_inputs(tape, scene, step0, cfg.coordinate_scale);
  const auto h = tape.constant(Tensor({1, cfg.hidden_dim}, 0.2));
  const auto out = switch_step(tape, p, cfg, state, h, in.features, in.motion, classes_of(scene));
  return {{out.score.value()[0], out.gamma, out.nearest, out.attention}, state.score_history};
}

}  // namespace

TEST(Switch, ScoreNeverExceedsDiscount) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = run_switch(micro_scene(seed), seed, seed % 5, true);
    const double score = r.out.score;
    ASSERT_GE(score, 0.0);
    ASSERT_LE(score, r.out.gamma);
    ASSERT_GT(r.out.gamma, 0.0);
    ASSERT_LE(r.out.gamma, 1.0);
  }
}

TEST(Switch, DiscountUsesNearestCentroidInMillimetres) {
  const auto scene = micro_scene(3);
  const auto feats = scene.features_at(0);
  const double nearest_mm = std::min(center_leaf_distance(feats[0], feats[1]), center_leaf_distance(feats[0], feats[2]));
  for (double scale : {1e-3, 2.5e-4, 1.0}) {
    const auto r = run_switch(scene, 3, 0, false, scale);
    EXPECT_NEAR(r.out.nearest, nearest_mm * scale, 1e-12);
    EXPECT_NEAR(r.out.gamma, discount(ModelConfig{}.beta_init_per_mm, {nearest_mm}), 1e-12);
    EXPECT_EQ(r.out.attention.size(), 2u);
  }
}

TEST(Switch, LoneHumanScoresZero) {
  auto scene = micro_scene(4);
  scene.entities.resize(1);
  const auto r = run_switch(scene, 4, 0);
  EXPECT_EQ(r.out.gamma, 0.0);
  EXPECT_EQ(r.out.score, 0.0);
  EXPECT_TRUE(std::isinf(r.out.nearest));
  EXPECT_EQ(r.history, (std::vector<double>{0.0}));
}
