#include "ptd/geometry.hpp"

#include <stdexcept>

namespace ptd {

std::size_t point_count(EntityClass cls) { return cls == EntityClass::human ? kHumanJoints : kBoxCorners; }

std::string_view to_string(EntityClass cls) { return cls == EntityClass::human ? "human" : "object"; }

EntityClass parse_entity_class(std::string_view text) {
  if (text == "human") return EntityClass::human;
  if (text == "object") return EntityClass::object;
  throw std::invalid_argument("unknown entity class '" + std::string(text) + "'");
}

void EntityFeatures::validate() const {
  if (points.size() != point_count(cls)) {
    throw std::invalid_argument(std::string(to_string(cls)) + " entity needs " + std::to_string(point_count(cls)) +
                                " points, got " + std::to_string(points.size()));
  }
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw std::invalid_argument("entity has a non-finite coordinate");
    }
  }
}

std::vector<double> EntityFeatures::flatten() const {
  std::vector<double> out;
  out.reserve(points.size() * 3);
  for (const auto& p : points) {
    out.push_back(p.x);
    out.push_back(p.y);
    out.push_back(p.z);
  }
  return out;
}

EntityFeatures EntityFeatures::from_flat(EntityClass cls, std::string class_label, const std::vector<double>& flat) {
  if (flat.size() != 3 * point_count(cls)) {
    throw std::invalid_argument(std::string(to_string(cls)) + " entity needs " +
                                std::to_string(3 * point_count(cls)) + " coordinates, got " +
                                std::to_string(flat.size()));
  }
  EntityFeatures f{cls, std::move(class_label), {}};
  f.points.reserve(flat.size() / 3);
  for (std::size_t i = 0; i < flat.size(); i += 3) f.points.push_back({flat[i], flat[i + 1], flat[i + 2]});
  return f;
}

Vec3 centroid(const EntityFeatures& f) {
  if (f.points.empty()) throw std::invalid_argument("centroid of an entity without points");
  Vec3 c;
  for (const auto& p : f.points) c += p;
  return c * (1.0 / static_cast<double>(f.points.size()));
}

namespace {

const EntityFeatures& require_human(const EntityFeatures& center) {
  if (center.cls != EntityClass::human) {
    throw std::invalid_argument("egocentric center must be a human entity, got " + std::string(to_string(center.cls)));
  }
  return center;
}

EntityFeatures translate(EntityFeatures x, const Vec3& by) {
  for (auto& p : x.points) p += by;
  return x;
}

}  // namespace

EntityFeatures ego_transform(const EntityFeatures& x, const EntityFeatures& center) {
  return translate(x, Vec3{} - centroid(require_human(center)));
}

EntityFeatures ego_inverse(const EntityFeatures& x_bar, const EntityFeatures& center) {
  return translate(x_bar, centroid(require_human(center)));
}

double center_leaf_distance(const EntityFeatures& center, const EntityFeatures& leaf) {
  return distance(centroid(center), centroid(leaf));
}

namespace ad {

namespace {

std::size_t points_in(const Var& flat) {
  if (flat.size() % 3 != 0) {
    throw std::invalid_argument("feature row of shape " + shape_string(flat.shape()) + " is not a list of 3D points");
  }
  return flat.size() / 3;
}

}  // namespace

Var centroid(const Var& flat) {
  const std::size_t n = points_in(flat);
  return scale(sum_axis(reshape(flat, {n, 3}), 0), 1.0 / static_cast<double>(n));
}

Var ego_transform(const Var& flat, const Var& center_centroid) {
  const std::size_t n = points_in(flat);
  return reshape(sub(reshape(flat, {n, 3}), center_centroid), {1, 3 * n});
}

Var ego_inverse(const Var& flat_bar, const Var& center_centroid) {
  const std::size_t n = points_in(flat_bar);
  return reshape(add(reshape(flat_bar, {n, 3}), center_centroid), {1, 3 * n});
}

Var centroid_distance(const Var& a_centroid, const Var& b_centroid) {
  return sqrt(squared_l2(sub(a_centroid, b_centroid)));
}

}  // namespace ad

}  // namespace ptd
