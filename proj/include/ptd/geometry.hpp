#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ptd/autodiff.hpp"

// Entity geometry in millimetres: centroids, the egocentric translation and
// its inverse, and centroid-to-centroid distances. The ad:: overloads perform
// the same transforms on flattened feature rows recorded on a tape.
namespace ptd {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, Vec3 a) { return a * s; }
  bool operator==(const Vec3&) const = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

enum class EntityClass { human, object };

inline constexpr std::size_t kHumanJoints = 18;
inline constexpr std::size_t kBoxCorners = 8;
// Widest flattened feature vector (a human skeleton).
inline constexpr std::size_t kMaxFeatureWidth = 3 * kHumanJoints;

std::size_t point_count(EntityClass cls);
std::string_view to_string(EntityClass cls);
EntityClass parse_entity_class(std::string_view text);

struct EntityFeatures {
  EntityClass cls = EntityClass::object;
  std::string class_label;
  std::vector<Vec3> points;

  // Throws if the point count does not match the class or a coordinate is not finite.
  void validate() const;
  std::vector<double> flatten() const;
  static EntityFeatures from_flat(EntityClass cls, std::string class_label, const std::vector<double>& flat);

  bool operator==(const EntityFeatures&) const = default;
};

Vec3 centroid(const EntityFeatures& f);
EntityFeatures ego_transform(const EntityFeatures& x, const EntityFeatures& center);
EntityFeatures ego_inverse(const EntityFeatures& x_bar, const EntityFeatures& center);
double center_leaf_distance(const EntityFeatures& center, const EntityFeatures& leaf);

namespace ad {

// `flat` is a 1 x 3P row of point coordinates; centroids are 1 x 3 rows.
Var centroid(const Var& flat);
Var ego_transform(const Var& flat, const Var& center_centroid);
Var ego_inverse(const Var& flat_bar, const Var& center_centroid);
Var centroid_distance(const Var& a_centroid, const Var& b_centroid);

}  // namespace ad

}  // namespace ptd
