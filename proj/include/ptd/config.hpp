#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ptd/model_config.hpp"
#include "ptd/synth.hpp"
#include "ptd/training.hpp"

// Flat `section.key = value` configuration files. Blank lines and lines
// starting with '#' are ignored; every key has a default, so a file only
// lists what it changes.
namespace ptd {

struct EvalConfig {
  std::string subset = "validation";  // all | validation
  std::string dump_scene;             // scene for the attention/edge dump; empty = first evaluated
  std::size_t threads = 1;
};

struct RunConfig {
  GenConfig gen;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  bool train_ablation = true;  // also train the persistent-only model
};

struct ConfigKey {
  std::string key;
  std::string doc;
};

// Every recognised key in file order, with a one-line description.
const std::vector<ConfigKey>& config_keys();

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_setting(const RunConfig& cfg, std::string_view key);

RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
// Applies the settings of `in` on top of `cfg`, then validates.
void parse_config_into(RunConfig& cfg, std::istream& in, const std::string& source = "<config>");
void validate(const RunConfig& cfg, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
// Keys whose name starts with `prefix`, one `key = value` per line.
std::string format_config(const RunConfig& cfg, std::string_view prefix = "");

// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace ptd
