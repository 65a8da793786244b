#include "ptd/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <stdexcept>

namespace ptd {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

struct Field {
  ConfigKey info;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw std::invalid_argument("'" + std::string(text) + "' is not a valid number");
  return v;
}

bool parse_bool(std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("'" + std::string(text) + "' is not true/false");
}

template <class Get>
Field make(std::string key, std::string doc, Get ref) {
  using T = std::remove_reference_t<decltype(ref(std::declval<RunConfig&>()))>;
  Field f;
  f.info = {std::move(key), std::move(doc)};
  f.set = [ref](RunConfig& c, std::string_view v) {
    if constexpr (std::is_same_v<T, bool>) {
      ref(c) = parse_bool(v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      ref(c) = std::string(v);
    } else if constexpr (std::is_same_v<T, nn::Activation>) {
      ref(c) = nn::parse_activation(v);
    } else if constexpr (std::is_same_v<T, ModelMode>) {
      ref(c) = parse_model_mode(v);
    } else {
      ref(c) = parse_number<T>(v);
    }
  };
  f.get = [ref](const RunConfig& c) -> std::string {
    auto& v = ref(const_cast<RunConfig&>(c));
    if constexpr (std::is_same_v<T, bool>) {
      return v ? "true" : "false";
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, nn::Activation> || std::is_same_v<T, ModelMode>) {
      return std::string(to_string(v));
    } else if constexpr (std::is_floating_point_v<T>) {
      return format_double(v);
    } else {
      return std::to_string(v);
    }
  };
  return f;
}

#define PTD_FIELD(key, member, doc) make(key, doc, [](RunConfig& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      PTD_FIELD("gen.scenes", gen.scenes, "number of generated scenes"),
      PTD_FIELD("gen.steps", gen.steps, "steps per scene (observed + predicted)"),
      PTD_FIELD("gen.dt", gen.dt, "seconds per step"),
      PTD_FIELD("gen.min_humans", gen.min_humans, "fewest humans per scene"),
      PTD_FIELD("gen.max_humans", gen.max_humans, "most humans per scene"),
      PTD_FIELD("gen.min_objects", gen.min_objects, "fewest objects per scene, table included"),
      PTD_FIELD("gen.max_objects", gen.max_objects, "most objects per scene, table included"),
      PTD_FIELD("gen.episode_rate", gen.episode_rate, "chance that a human has an interaction episode"),
      PTD_FIELD("gen.min_carry", gen.min_carry, "shortest carry, steps"),
      PTD_FIELD("gen.max_carry", gen.max_carry, "longest carry, steps"),
      PTD_FIELD("gen.min_onset", gen.min_onset, "earliest approach onset step"),
      PTD_FIELD("gen.max_onset", gen.max_onset, "latest approach onset step"),
      PTD_FIELD("gen.onset_radius_mm", gen.onset_radius_mm, "target distance at the approach onset"),
      PTD_FIELD("gen.label_lead", gen.label_lead, "label steps before the approach onset"),
      PTD_FIELD("gen.arena_mm", gen.arena_mm, "side of the square arena"),
      PTD_FIELD("gen.min_speed", gen.min_speed, "slowest walking speed, mm per step"),
      PTD_FIELD("gen.max_speed", gen.max_speed, "fastest walking speed, mm per step"),
      PTD_FIELD("gen.clearance_mm", gen.clearance_mm, "keep-out radius around unrelated entities"),
      PTD_FIELD("gen.seed", gen.seed, "generator seed"),
      PTD_FIELD("model.hidden_dim", model.hidden_dim, "recurrent hidden size"),
      PTD_FIELD("model.attn_dim", model.attn_dim, "attention projection size"),
      PTD_FIELD("model.message_dim", model.message_dim, "transient message size"),
      PTD_FIELD("model.mlp_hidden", model.mlp_hidden, "hidden width of every MLP"),
      PTD_FIELD("model.rho_in_mm", model.rho_in_mm, "inward edge radius"),
      PTD_FIELD("model.rho_out_mm", model.rho_out_mm, "outward edge radius"),
      PTD_FIELD("model.beta_init_per_mm", model.beta_init_per_mm, "initial switch decay rate"),
      PTD_FIELD("model.switch_threshold", model.switch_threshold, "switch-on score threshold"),
      PTD_FIELD("model.observe_steps", model.observe_steps, "observed steps T"),
      PTD_FIELD("model.predict_steps", model.predict_steps, "predicted steps L"),
      PTD_FIELD("model.attention_activation", model.attention_activation, "attention output activation"),
      PTD_FIELD("model.transient_message_activation", model.transient_message_activation,
                "activation of the transient-to-persistent message"),
      PTD_FIELD("model.mode", model.mode, "ptd or persistent_only"),
      PTD_FIELD("model.coordinate_scale", model.coordinate_scale, "network units per millimetre"),
      PTD_FIELD("model.motion_features", model.motion_features, "append last-step displacements to the inputs"),
      PTD_FIELD("model.motion_scale", model.motion_scale, "gain applied to displacements before encoding"),
      PTD_FIELD("model.seed", model.seed, "parameter initialisation seed"),
      PTD_FIELD("train.lambda", train.lambda, "switch-loss weight"),
      PTD_FIELD("train.learning_rate", train.learning_rate, "Adam step size"),
      PTD_FIELD("train.epochs", train.epochs, "passes over the training split"),
      PTD_FIELD("train.batch_size", train.batch_size, "scenes per update"),
      PTD_FIELD("train.seed", train.seed, "shuffling seed"),
      PTD_FIELD("train.beta1", train.beta1, "first-moment decay"),
      PTD_FIELD("train.beta2", train.beta2, "second-moment decay"),
      PTD_FIELD("train.epsilon", train.epsilon, "Adam denominator guard"),
      PTD_FIELD("train.clip_norm", train.clip_norm, "global gradient-norm clip, 0 disables"),
      PTD_FIELD("train.train_fraction", train.train_fraction, "leading share of scenes used for training"),
      PTD_FIELD("train.threads", train.threads, "worker threads for scene gradients"),
      PTD_FIELD("train.ablation", train_ablation, "also train the persistent-only ablation"),
      PTD_FIELD("eval.subset", eval.subset, "all or validation"),
      PTD_FIELD("eval.dump_scene", eval.dump_scene, "scene id for the attention dump"),
      PTD_FIELD("eval.threads", eval.threads, "worker threads for evaluation"),
  };
  return all;
}

#undef PTD_FIELD

const Field& find_field(std::string_view key) {
  for (const auto& f : fields())
    if (f.info.key == key) return f;
  throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back(f.info);
    return out;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  const Field& f = find_field(key);
  try {
    f.set(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(key) + ": " + e.what());
  }
}

std::string get_setting(const RunConfig& cfg, std::string_view key) { return find_field(key).get(cfg); }

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig cfg;
  parse_config_into(cfg, in, source);
  return cfg;
}

void validate(const RunConfig& cfg, const std::string& source) {
  if (cfg.eval.subset != "all" && cfg.eval.subset != "validation") {
    throw std::invalid_argument(source + ": eval.subset must be 'all' or 'validation'");
  }
  cfg.gen.validate();
  cfg.model.validate();
  cfg.train.validate();
}

void parse_config_into(RunConfig& cfg, std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
    if (eq == std::string::npos) throw std::invalid_argument(where() + "expected 'key = value'");
    try {
      apply_setting(cfg, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where() + e.what());
    }
  }
  validate(cfg, source);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config '" + path.string() + "'");
  return parse_config(in, path.string());
}

std::string format_config(const RunConfig& cfg, std::string_view prefix) {
  std::string out;
  for (const auto& f : fields()) {
    if (f.info.key.compare(0, prefix.size(), prefix) != 0) continue;
    out += f.info.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

}  // namespace ptd
