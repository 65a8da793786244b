#include "ptd/micro.hpp"

#include <chrono>
#include <random>

#include "ptd/synth.hpp"

namespace ptd {

Scene micro_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-5.0, 5.0);
  Scene s;
  s.scene_id = "micro";
  const std::size_t steps = 5;
  SceneEntity human{0, EntityClass::human, "person", {}};
  SceneEntity carried{1, EntityClass::object, "cup", {}};
  SceneEntity nearby{2, EntityClass::object, "box", {}};
  const Vec3 start{100.0 + jitter(rng), -50.0 + jitter(rng), 950.0};
  const Vec3 walk{60.0 + jitter(rng), 20.0 + jitter(rng), 0.0};
  const Vec3 nearby_at{start.x + 150.0 + jitter(rng), start.y + 250.0 + jitter(rng), 915.0};
  for (std::size_t t = 0; t < steps; ++t) {
    const Vec3 c = start + walk * static_cast<double>(t);
    auto rig = human_rig(c);
    for (auto& p : rig) p += Vec3{jitter(rng), jitter(rng), jitter(rng)};
    human.frames.push_back(std::move(rig));
    carried.frames.push_back(box_corners(c + Vec3{40.0, 0.0, -35.0 + jitter(rng)}, {60, 60, 80}));
    nearby.frames.push_back(box_corners(nearby_at, {100, 120, 90}));
  }
  s.entities = {human, carried, nearby};
  s.switch_labels[0] = {0, 1, 1, 1, 0};
  return s;
}

ModelConfig micro_config(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.hidden_dim = 8;
  cfg.attn_dim = 8;
  cfg.message_dim = 8;
  cfg.mlp_hidden = 8;
  cfg.observe_steps = 3;
  cfg.predict_steps = 2;
  cfg.seed = seed;
  return cfg;
}

std::optional<bool> micro_switch_schedule(std::size_t step, std::size_t) { return step >= 2 && step <= 4; }

MicroCheck micro_gradcheck(std::uint64_t seed, double step, double lambda) {
  const auto start = std::chrono::steady_clock::now();
  PtdModel model = PtdModel::create(micro_config(seed));
  const Scene scene = micro_scene(seed);
  StepOptions opts;
  opts.override_switch = micro_switch_schedule;
  auto loss = [&](ad::Tape& tape) {
    const Rollout r = rollout(tape, model, scene, opts);
    return compute_loss(tape, r, scene, model.config.coordinate_scale, lambda).total;
  };
  MicroCheck out;
  out.parameters = model.store.scalar_count();
  out.result = ad::check_parameter_gradients(model.store, loss, step);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace ptd
