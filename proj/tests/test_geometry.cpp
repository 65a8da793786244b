#include <gtest/gtest.h>

#include <random>

#include "ptd/geometry.hpp"
#include "ptd/synth.hpp"

using namespace ptd;

namespace {

EntityFeatures random_entity(std::mt19937_64& rng, EntityClass cls) {
  std::uniform_real_distribution<double> u(-5000.0, 5000.0);
  EntityFeatures f{cls, cls == EntityClass::human ? "person" : "box", {}};
  for (std::size_t i = 0; i < point_count(cls); ++i) f.points.push_back({u(rng), u(rng), u(rng)});
  return f;
}

}  // namespace

TEST(Geometry, CentroidExamples) {
  EXPECT_EQ(centroid(EntityFeatures{EntityClass::object, "", {{0, 0, 0}, {2, 0, 0}}}), (Vec3{1, 0, 0}));
  EXPECT_EQ(centroid(EntityFeatures{EntityClass::object, "", {{5, -1, 2}}}), (Vec3{5, -1, 2}));
  const auto cube = box_corners({0.5, 0.5, 0.5}, {0.5, 0.5, 0.5});
  EXPECT_EQ(centroid(EntityFeatures{EntityClass::object, "", cube}), (Vec3{0.5, 0.5, 0.5}));
  EXPECT_THROW(centroid(EntityFeatures{}), std::invalid_argument);
}

TEST(Geometry, EgoTransformTranslatesByCenterCentroid) {
  const EntityFeatures center{EntityClass::human, "person", human_rig({1, 0, 0})};
  const EntityFeatures leaf{EntityClass::object, "box", std::vector<Vec3>(8, Vec3{3, 1, 0})};
  const auto bar = ego_transform(leaf, center);
  const Vec3 c = centroid(center);
  EXPECT_NEAR(bar.points[0].x, 3 - c.x, 1e-12);
  EXPECT_NEAR(bar.points[0].y, 1 - c.y, 1e-12);
  EXPECT_EQ(bar.cls, leaf.cls);
  EXPECT_EQ(bar.class_label, leaf.class_label);

  const auto self = centroid(ego_transform(center, center));
  EXPECT_NEAR(self.norm(), 0.0, 1e-12);
}

TEST(Geometry, EgoInverseOfOriginIsCenterCentroid) {
  EntityFeatures center{EntityClass::human, "person", std::vector<Vec3>(18, Vec3{1, 2, 3})};
  const EntityFeatures origin{EntityClass::object, "box", std::vector<Vec3>(8, Vec3{})};
  EXPECT_EQ(ego_inverse(origin, center).points[0], (Vec3{1, 2, 3}));
}

TEST(Geometry, EgoRequiresHumanCenter) {
  std::mt19937_64 rng(1);
  const auto obj = random_entity(rng, EntityClass::object);
  EXPECT_THROW(ego_transform(obj, obj), std::invalid_argument);
  EXPECT_THROW(ego_inverse(obj, obj), std::invalid_argument);
}

TEST(Geometry, RoundTripIsIdentityOnRandomEntities) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto center = random_entity(rng, EntityClass::human);
    const auto x = random_entity(rng, trial % 2 ? EntityClass::human : EntityClass::object);
    const auto back = ego_inverse(ego_transform(x, center), center);
    for (std::size_t k = 0; k < x.points.size(); ++k) {
      ASSERT_LE(std::abs(back.points[k].x - x.points[k].x), 1e-12);
      ASSERT_LE(std::abs(back.points[k].y - x.points[k].y), 1e-12);
      ASSERT_LE(std::abs(back.points[k].z - x.points[k].z), 1e-12);
    }
  }
}

TEST(Geometry, EgoTransformPreservesPairwiseDistances) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto center = random_entity(rng, EntityClass::human);
    const auto x = random_entity(rng, EntityClass::human);
    const auto bar = ego_transform(x, center);
    for (std::size_t a = 0; a < x.points.size(); ++a)
      for (std::size_t b = a + 1; b < x.points.size(); ++b)
        ASSERT_NEAR(distance(bar.points[a], bar.points[b]), distance(x.points[a], x.points[b]), 1e-9);
  }
}

TEST(Geometry, CenterLeafDistance) {
  const EntityFeatures a{EntityClass::object, "", std::vector<Vec3>(8, Vec3{0, 0, 0})};
  const EntityFeatures b{EntityClass::object, "", std::vector<Vec3>(8, Vec3{3, 4, 0})};
  EXPECT_DOUBLE_EQ(center_leaf_distance(a, b), 5.0);
  EXPECT_DOUBLE_EQ(center_leaf_distance(a, a), 0.0);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_entity(rng, EntityClass::human);
    const auto q = random_entity(rng, EntityClass::object);
    EXPECT_EQ(center_leaf_distance(p, q), center_leaf_distance(q, p));
    EXPECT_GT(center_leaf_distance(p, q), 0.0);
  }
}

TEST(Geometry, PointCountsAreEnforced) {
  EntityFeatures f{EntityClass::human, "person", std::vector<Vec3>(17)};
  EXPECT_THROW(f.validate(), std::invalid_argument);
  f.points.resize(18);
  EXPECT_NO_THROW(f.validate());
  f.points[3].y = std::nan("");
  EXPECT_THROW(f.validate(), std::invalid_argument);
  EXPECT_THROW(EntityFeatures::from_flat(EntityClass::object, "", std::vector<double>(23)), std::invalid_argument);
}

TEST(Geometry, TapeTransformsMatchPlainOnes) {
  std::mt19937_64 rng(5);
  const auto center = random_entity(rng, EntityClass::human);
  const auto x = random_entity(rng, EntityClass::object);
  ad::Tape tape;
  auto row = [&](const EntityFeatures& f) {
    const auto flat = f.flatten();
    return tape.constant(Tensor({1, flat.size()}, flat));
  };
  const auto c = ad::centroid(row(center));
  const Vec3 plain = centroid(center);
  EXPECT_NEAR(c.value()[0], plain.x, 1e-9);
  EXPECT_NEAR(c.value()[2], plain.z, 1e-9);
  const auto bar = ad::ego_transform(row(x), c);
  const auto expect = ego_transform(x, center).flatten();
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(bar.value()[i], expect[i], 1e-9);
  const auto back = ad::ego_inverse(bar, c);
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(back.value()[i], x.flatten()[i], 1e-9);
  const auto d = ad::centroid_distance(ad::centroid(row(x)), c);
  EXPECT_NEAR(d.value()[0], center_leaf_distance(center, x), 1e-9);
}
