#include "ptd/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace ptd {

void GenConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("gen config: " + what); };
  if (scenes == 0) fail("scenes must be positive");
  if (steps < 2) fail("steps must be at least 2");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (min_humans == 0 || min_humans > max_humans) fail("bad human count range");
  if (min_objects == 0 || min_objects > max_objects) fail("bad object count range");
  if (!(episode_rate >= 0.0 && episode_rate <= 1.0)) fail("episode_rate must lie in [0, 1]");
  if (min_carry == 0 || min_carry > max_carry) fail("bad carry range");
  if (min_onset == 0 || min_onset > max_onset) fail("bad onset range");
  if (!(onset_radius_mm > 100.0)) fail("onset_radius_mm must exceed the grasp distance");
  if (!(arena_mm > 0.0)) fail("arena_mm must be positive");
  if (!(min_speed > 0.0 && min_speed <= max_speed)) fail("bad speed range");
  if (!(clearance_mm > onset_radius_mm)) fail("clearance_mm must exceed onset_radius_mm");
}

namespace {

constexpr double kHumanHeight = 950.0;  // centroid height of the rig
constexpr double kGraspAhead = 35.0;    // carried object sits ahead of and below the centroid
constexpr double kGraspDrop = 35.0;
constexpr double kObjectHeight = kHumanHeight - kGraspDrop;
constexpr int kMaxAttempts = 500;
constexpr double kContactRadius = 100.0;

const std::array<Vec3, kHumanJoints> kRig = {{
    {0, 0, 1650},    {0, 0, 1450},    {0, -180, 1420}, {0, -200, 1150}, {60, -210, 930}, {0, 180, 1420},
    {0, 200, 1150},  {60, 210, 930},  {0, -100, 950},  {0, -100, 500},  {0, -100, 80},   {0, 100, 950},
    {0, 100, 500},   {0, 100, 80},    {40, -30, 1680}, {40, 30, 1680},  {0, -70, 1660},  {0, 70, 1660},
}};

const std::array<const char*, 5> kMovableLabels = {"cup", "box", "bottle", "bag", "bowl"};

struct Human {
  std::vector<Vec3> path;  // centroid per step
  bool episode = false;
  std::size_t target = 0;  // index into movable objects
  std::vector<std::uint8_t> labels;
};

struct Movable {
  std::vector<Vec3> path;
  Vec3 half;
  std::string label;
  bool claimed = false;
};

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Vec3 heading(double angle) { return {std::cos(angle), std::sin(angle), 0.0}; }

bool inside(const GenConfig& cfg, const Vec3& p) {
  const double h = cfg.arena_mm / 2.0;
  return std::abs(p.x) <= h && std::abs(p.y) <= h;
}

bool path_inside(const GenConfig& cfg, const std::vector<Vec3>& path) {
  return std::all_of(path.begin(), path.end(), [&](const Vec3& p) { return inside(cfg, p); });
}

double min_gap(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double best = INFINITY;
  for (std::size_t t = 0; t < a.size(); ++t) best = std::min(best, distance(a[t], b[t]));
  return best;
}

Vec3 random_floor_point(const GenConfig& cfg, Rng& rng, double height) {
  const double h = cfg.arena_mm / 2.0;
  return {uniform(rng, -h, h), uniform(rng, -h, h), height};
}

// Straight walk at constant speed through the whole scene.
std::vector<Vec3> straight_path(const GenConfig& cfg, Rng& rng) {
  const Vec3 start = random_floor_point(cfg, rng, kHumanHeight);
  const Vec3 dir = heading(uniform(rng, -std::numbers::pi, std::numbers::pi));
  const double speed = uniform(rng, cfg.min_speed, cfg.max_speed);
  std::vector<Vec3> path;
  for (std::size_t t = 0; t < cfg.steps; ++t) path.push_back(start + dir * (speed * static_cast<double>(t)));
  return path;
}

// Walk, turn toward the target at the onset step, carry it, release, walk on.
// Returns the human path, fills the target's path and the labels.
std::vector<Vec3> episode_path(const GenConfig& cfg, Rng& rng, Movable& target, std::vector<std::uint8_t>& labels) {
  const std::size_t n = cfg.steps;
  const std::size_t onset = uniform_int(rng, cfg.min_onset, std::min(cfg.max_onset, n)) - 1;  // 0-based
  const double speed = uniform(rng, cfg.min_speed, cfg.max_speed);
  const double walk_angle = uniform(rng, -std::numbers::pi, std::numbers::pi);
  const Vec3 walk = heading(walk_angle);
  const Vec3 at_onset = random_floor_point(cfg, rng, kHumanHeight);

  // Target inside the labelled radius, ahead of the walking direction.
  const double reach = cfg.onset_radius_mm * uniform(rng, 0.85, 0.95);
  const double flat_reach = std::sqrt(reach * reach - kGraspDrop * kGraspDrop);
  const Vec3 to_target = heading(walk_angle + uniform(rng, -std::numbers::pi / 3, std::numbers::pi / 3));
  const Vec3 object_start = Vec3{at_onset.x, at_onset.y, kObjectHeight} + to_target * flat_reach;
  const Vec3 grasp_offset = to_target * kGraspAhead + Vec3{0, 0, -kGraspDrop};
  const Vec3 grasp_point = object_start - grasp_offset;

  const double approach_len = distance(at_onset, grasp_point);
  const std::size_t approach_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(approach_len / speed)));
  const double approach_speed = approach_len / static_cast<double>(approach_steps);
  const std::size_t grasp = onset + approach_steps;  // first step holding the object
  const std::size_t release = grasp + uniform_int(rng, cfg.min_carry, cfg.max_carry);

  std::vector<Vec3> path(n);
  target.path.assign(n, object_start);
  for (std::size_t t = 0; t < n; ++t) {
    if (t <= onset) {
      path[t] = at_onset - walk * (speed * static_cast<double>(onset - t));
    } else if (t <= grasp) {
      path[t] = at_onset + to_target * (approach_speed * static_cast<double>(t - onset));
    } else {
      path[t] = grasp_point + to_target * (speed * static_cast<double>(t - grasp));
    }
    if (t >= grasp && t < release) target.path[t] = path[t] + grasp_offset;
    if (t >= release) target.path[t] = target.path[t - 1];
  }

  // Labelled from (onset - lead) until the human has left the neighbourhood.
  labels.assign(n, 0);
  const std::size_t first = onset >= cfg.label_lead ? onset - cfg.label_lead : 0;
  for (std::size_t t = first; t < n; ++t) {
    if (t > grasp && distance(path[t], target.path[t]) > cfg.onset_radius_mm) break;
    labels[t] = 1;
  }
  return path;
}

}  // namespace

std::vector<Vec3> human_rig(const Vec3& center) {
  Vec3 mean;
  for (const auto& j : kRig) mean += j;
  mean = mean * (1.0 / static_cast<double>(kRig.size()));
  std::vector<Vec3> out;
  out.reserve(kRig.size());
  for (const auto& j : kRig) out.push_back(center + (j - mean));
  return out;
}

std::vector<Vec3> box_corners(const Vec3& c, const Vec3& h) {
  std::vector<Vec3> out;
  out.reserve(kBoxCorners);
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) out.push_back({c.x + sx * h.x, c.y + sy * h.y, c.z + sz * h.z});
  return out;
}

Scene generate_scene(const GenConfig& cfg, std::size_t index) {
  cfg.validate();
  std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(index)};
  Rng rng(seq);
  const std::size_t n = cfg.steps;

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::size_t humans = uniform_int(rng, cfg.min_humans, cfg.max_humans);
    const std::size_t objects = uniform_int(rng, cfg.min_objects, cfg.max_objects);
    std::vector<Movable> movables(objects - 1);
    for (auto& m : movables) {
      m.half = {uniform(rng, 60, 200), uniform(rng, 60, 200), uniform(rng, 50, 150)};
      m.label = kMovableLabels[uniform_int(rng, 0, kMovableLabels.size() - 1)];
    }

    bool ok = true;
    std::vector<Human> people(humans);
    for (std::size_t h = 0; h < humans && ok; ++h) {
      auto& p = people[h];
      auto free_target = std::find_if(movables.begin(), movables.end(), [](const Movable& m) { return !m.claimed; });
      p.episode = free_target != movables.end() && std::bernoulli_distribution(cfg.episode_rate)(rng);
      if (p.episode) {
        p.target = static_cast<std::size_t>(free_target - movables.begin());
        free_target->claimed = true;
        p.path = episode_path(cfg, rng, *free_target, p.labels);
        ok = path_inside(cfg, free_target->path);
      } else {
        p.path = straight_path(cfg, rng);
        p.labels.assign(n, 0);
      }
      ok = ok && path_inside(cfg, p.path);
      for (std::size_t o = 0; o < h && ok; ++o) {
        ok = min_gap(p.path, people[o].path) > cfg.clearance_mm;
        if (ok && p.episode) ok = min_gap(people[o].path, movables[p.target].path) > cfg.clearance_mm;
        if (ok && people[o].episode) ok = min_gap(p.path, movables[people[o].target].path) > cfg.clearance_mm;
      }
    }
    if (!ok) continue;

    // Remaining movable objects and the table stay clear of every human.
    auto clear_of_humans = [&](const std::vector<Vec3>& path, double extra) {
      return std::all_of(people.begin(), people.end(),
                         [&](const Human& p) { return min_gap(p.path, path) > cfg.clearance_mm + extra; });
    };
    const Vec3 table_half{600, 400, 375};
    std::vector<Vec3> table_path;
    for (int tries = 0; tries < kMaxAttempts && table_path.empty(); ++tries) {
      std::vector<Vec3> cand(n, random_floor_point(cfg, rng, table_half.z));
      if (clear_of_humans(cand, table_half.x)) table_path = std::move(cand);
    }
    ok = !table_path.empty();
    for (auto& m : movables) {
      if (!ok || m.claimed) continue;
      bool placed = false;
      for (int tries = 0; tries < kMaxAttempts && !placed; ++tries) {
        std::vector<Vec3> cand(n, random_floor_point(cfg, rng, kObjectHeight));
        placed = clear_of_humans(cand, 0.0);
        if (placed) m.path = std::move(cand);
      }
      ok = placed;
    }
    if (!ok) continue;

    Scene s;
    char id_buf[32];
    std::snprintf(id_buf, sizeof id_buf, "scene_%04zu", index);
    s.scene_id = id_buf;
    s.dt = cfg.dt;
    int id = 0;
    for (auto& p : people) {
      SceneEntity e{id, EntityClass::human, "person", {}};
      for (const auto& c : p.path) e.frames.push_back(human_rig(c));
      s.switch_labels[id] = p.labels;
      s.entities.push_back(std::move(e));
      ++id;
    }
    SceneEntity table{id++, EntityClass::object, "table", {}};
    for (const auto& c : table_path) table.frames.push_back(box_corners(c, table_half));
    s.entities.push_back(std::move(table));
    for (const auto& m : movables) {
      SceneEntity e{id++, EntityClass::object, m.label, {}};
      for (const auto& c : m.path) e.frames.push_back(box_corners(c, m.half));
      s.entities.push_back(std::move(e));
    }

    // Labelled-0 steps keep every human clear of manipulation range.
    for (const auto& h : s.human_indices()) {
      const auto& bits = s.switch_labels.at(s.entities[h].id);
      for (std::size_t t = 0; t < n; ++t) {
        if (bits[t]) continue;
        for (std::size_t o = 0; o < s.entities.size(); ++o) {
          if (s.entities[o].cls != EntityClass::object) continue;
          if (center_leaf_distance(s.entities[h].at(t), s.entities[o].at(t)) <= kContactRadius) {
            throw std::logic_error("generator produced an unlabelled contact in " + s.scene_id);
          }
        }
      }
    }
    s.validate();
    return s;
  }
  throw std::runtime_error("arena of " + std::to_string(cfg.arena_mm) + " mm is too small for scene " +
                           std::to_string(index) + " after " + std::to_string(kMaxAttempts) + " attempts");
}

std::vector<Scene> generate_dataset(const GenConfig& cfg) {
  std::vector<Scene> out;
  out.reserve(cfg.scenes);
  for (std::size_t i = 0; i < cfg.scenes; ++i) out.push_back(generate_scene(cfg, i));
  return out;
}

}  // namespace ptd
