#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "ptd/config.hpp"

using namespace ptd;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "run.cfg");
}

std::string parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, EmptyFileGivesDefaults) {
  const auto cfg = parse("# nothing here\n\n");
  EXPECT_EQ(format_config(cfg), format_config(RunConfig{}));
  EXPECT_EQ(cfg.gen.scenes, 250u);
  EXPECT_EQ(cfg.model.rho_in_mm, 500.0);
  EXPECT_EQ(cfg.train.epochs, 50u);
}

TEST(Config, SettingsOverrideDefaults) {
  const auto cfg = parse(
      "gen.scenes = 12\n"
      "  model.hidden_dim=16  \n"
      "model.mode = persistent_only\n"
      "model.attention_activation = relu\n"
      "train.learning_rate = 0.003\n"
      "train.ablation = false\n"
      "eval.subset = all\n");
  EXPECT_EQ(cfg.gen.scenes, 12u);
  EXPECT_EQ(cfg.model.hidden_dim, 16u);
  EXPECT_EQ(cfg.model.mode, ModelMode::persistent_only);
  EXPECT_EQ(cfg.model.attention_activation, nn::Activation::relu);
  EXPECT_EQ(cfg.train.learning_rate, 0.003);
  EXPECT_FALSE(cfg.train_ablation);
  EXPECT_EQ(cfg.eval.subset, "all");
}

TEST(Config, FormatParsesBackToTheSameConfig) {
  RunConfig cfg;
  apply_setting(cfg, "model.coordinate_scale", "0.00025");
  apply_setting(cfg, "train.lambda", "0.1");
  apply_setting(cfg, "gen.seed", "99");
  const auto text = format_config(cfg);
  EXPECT_EQ(format_config(parse(text)), text);
  EXPECT_EQ(get_setting(parse(text), "model.coordinate_scale"), "0.00025");
}

TEST(Config, EveryKeyIsReadableAndDocumented) {
  std::set<std::string> seen;
  RunConfig cfg;
  for (const auto& k : config_keys()) {
    EXPECT_TRUE(seen.insert(k.key).second) << k.key;
    EXPECT_FALSE(k.doc.empty()) << k.key;
    const auto value = get_setting(cfg, k.key);
    EXPECT_NO_THROW(apply_setting(cfg, k.key, value)) << k.key;
  }
  for (const char* key : {"gen.scenes", "model.rho_in_mm", "model.rho_out_mm", "model.switch_threshold",
                          "model.observe_steps", "model.predict_steps", "train.lambda", "train.batch_size"})
    EXPECT_TRUE(seen.count(key)) << key;
}

TEST(Config, FormatFiltersByPrefix) {
  const auto text = format_config(RunConfig{}, "model.");
  EXPECT_NE(text.find("model.hidden_dim = 64\n"), std::string::npos);
  EXPECT_EQ(text.find("gen."), std::string::npos);
}

TEST(Config, ErrorsNameSourceAndLine) {
  EXPECT_NE(parse_error("gen.scenes = 3\nmodel.bogus = 1\n").find("run.cfg:2:"), std::string::npos);
  EXPECT_NE(parse_error("gen.scenes = 3\nmodel.bogus = 1\n").find("model.bogus"), std::string::npos);
  EXPECT_NE(parse_error("\n\ngen.scenes three\n").find("run.cfg:3:"), std::string::npos);
  EXPECT_NE(parse_error("gen.scenes = -4\n").find("run.cfg:1:"), std::string::npos);
  EXPECT_NE(parse_error("train.threads = 2.5\n").find("run.cfg:1:"), std::string::npos);
  EXPECT_NE(parse_error("model.mode = hybrid\n").find("run.cfg:1:"), std::string::npos);
}

TEST(Config, InvalidCombinationsAreRejected) {
  EXPECT_FALSE(parse_error("model.rho_out_mm = 600\n").empty());
  EXPECT_FALSE(parse_error("eval.subset = some\n").empty());
  EXPECT_FALSE(parse_error("train.batch_size = 0\n").empty());
  EXPECT_FALSE(parse_error("gen.min_objects = 9\n").empty());
}

TEST(Config, FormatDoubleIsShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1e-3), "0.001");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}
