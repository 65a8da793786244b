// ptd: generate synthetic scenes, train, evaluate, predict and gradient-check.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ptd/config.hpp"
#include "ptd/dataset_io.hpp"
#include "ptd/micro.hpp"
#include "ptd/model_io.hpp"
#include "ptd/report.hpp"

namespace fs = std::filesystem;
using namespace ptd;

namespace {

RunConfig config_from(const std::string& base, const std::string& file) {
  RunConfig cfg;
  for (const auto& path : {base, file}) {
    if (path.empty() || !fs::exists(path)) continue;
    std::ifstream in(path);
    parse_config_into(cfg, in, path);
  }
  return cfg;
}

void print_config(const RunConfig& cfg, std::string_view prefix, const char* seed_key) {
  std::cout << "# resolved config\n" << format_config(cfg, prefix);
  std::cout << "# seed " << get_setting(cfg, seed_key) << "\n";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir.string() + "': " + ec.message());
}

int cmd_generate(const std::string& config, const std::string& out) {
  RunConfig cfg = config_from("", config);
  print_config(cfg, "gen.", "gen.seed");
  const auto scenes = generate_dataset(cfg.gen);
  if (fs::path(out).has_parent_path()) ensure_dir(fs::path(out).parent_path());
  write_dataset(scenes, fs::path(out));
  std::size_t interacting = 0;
  for (const auto& s : scenes) interacting += s.has_interaction() ? 1 : 0;
  std::cout << "wrote " << scenes.size() << " scenes (" << interacting << " with interactions) to " << out << "\n";
  return 0;
}

std::vector<EpochMetrics> train_one(PtdModel& model, const DatasetSplit& split, const RunConfig& cfg,
                                    const fs::path& metrics_path, const char* tag) {
  std::ofstream log(metrics_path, std::ios::binary);
  if (!log) throw std::runtime_error("cannot write '" + metrics_path.string() + "'");
  log << metrics_header() << "\n";
  std::cout << tag << " " << metrics_header() << "\n";
  auto result = train(model, split.train, split.validation, cfg.train, [&](const EpochMetrics& m) {
    log << metrics_row(m) << "\n";
    log.flush();
    std::cout << tag << " " << metrics_row(m) << std::endl;
  });
  if (result.skipped_updates) std::cout << tag << " skipped updates: " << result.skipped_updates << "\n";
  return result.epochs;
}

int cmd_train(const std::string& data, const std::string& config, const std::string& out) {
  RunConfig cfg = config_from("", config);
  print_config(cfg, "", "train.seed");
  const auto scenes = read_dataset(fs::path(data));
  const auto split = split_dataset(scenes, cfg.train.train_fraction);
  std::cout << "train scenes " << split.train.size() << ", validation scenes " << split.validation.size() << "\n";
  ensure_dir(out);
  write_text(fs::path(out) / "config.txt", format_config(cfg));

  PtdModel model = PtdModel::create(cfg.model);
  train_one(model, split, cfg, fs::path(out) / "metrics.csv", "ptd");
  save_model(model, fs::path(out) / "model.json");
  if (cfg.train_ablation) {
    ModelConfig abl = cfg.model;
    abl.mode = ModelMode::persistent_only;
    PtdModel ablation = PtdModel::create(abl);
    train_one(ablation, split, cfg, fs::path(out) / "ablation_metrics.csv", "ablation");
    save_model(ablation, fs::path(out) / "ablation.json");
  }
  std::cout << "saved model to " << out << "\n";
  return 0;
}

std::vector<Scene> eval_subset(const std::vector<Scene>& scenes, const RunConfig& cfg) {
  if (cfg.eval.subset == "all") return scenes;
  auto held_out = split_dataset(scenes, cfg.train.train_fraction).validation;
  if (held_out.empty()) throw std::runtime_error("no held-out scenes: train.train_fraction leaves nothing to evaluate");
  return held_out;
}

int cmd_eval(const std::string& model_dir, const std::string& data, const std::string& config, const std::string& out) {
  RunConfig cfg = config_from((fs::path(model_dir) / "config.txt").string(), config);
  print_config(cfg, "eval.", "model.seed");
  const PtdModel model = load_model(fs::path(model_dir) / "model.json");
  std::optional<PtdModel> ablation;
  if (fs::exists(fs::path(model_dir) / "ablation.json")) ablation = load_model(fs::path(model_dir) / "ablation.json");

  auto scenes = eval_subset(read_dataset(fs::path(data)), cfg);
  std::sort(scenes.begin(), scenes.end(), [](const Scene& a, const Scene& b) { return a.scene_id < b.scene_id; });
  ensure_dir(out);
  const fs::path dir(out);

  const EvalReport rep = evaluate(model, scenes, cfg.eval.threads);
  std::optional<EvalReport> abl_rep;
  if (ablation) abl_rep = evaluate(*ablation, scenes, cfg.eval.threads);
  const EvalReport* abl = abl_rep ? &*abl_rep : nullptr;
  write_horizon_csv(dir / "horizon.csv", rep, abl);
  write_switch_summary(dir / "summary.txt", rep, abl);
  write_scene_csv(dir / "scenes.csv", rep);
  write_chart_svg(dir / "horizon.svg", rep, abl);

  const auto inter = interaction_scenes(scenes);
  if (!inter.empty()) {
    const EvalReport irep = evaluate(model, inter, cfg.eval.threads);
    std::optional<EvalReport> iabl;
    if (ablation) iabl = evaluate(*ablation, inter, cfg.eval.threads);
    write_horizon_csv(dir / "horizon_interaction.csv", irep, iabl ? &*iabl : nullptr);
    write_switch_summary(dir / "summary_interaction.txt", irep, iabl ? &*iabl : nullptr);
    write_chart_svg(dir / "horizon_interaction.svg", irep, iabl ? &*iabl : nullptr);
  }

  const Scene* dump = scenes.empty() ? nullptr : &scenes.front();
  if (!cfg.eval.dump_scene.empty()) {
    auto it = std::find_if(scenes.begin(), scenes.end(), [&](const Scene& s) { return s.scene_id == cfg.eval.dump_scene; });
    if (it == scenes.end()) throw std::runtime_error("eval.dump_scene '" + cfg.eval.dump_scene + "' is not evaluated");
    dump = &*it;
  }
  if (dump) write_attention_dump(dir / "attention.csv", model, *dump);

  std::printf("scenes %zu  ADE %.3f mm (human %.3f, object %.3f)  switch P %.4f R %.4f F1 %.4f\n", scenes.size(),
              rep.ade_mm, rep.ade_human_mm, rep.ade_object_mm, rep.switch_counts.precision(),
              rep.switch_counts.recall(), rep.switch_counts.f1());
  if (abl) std::printf("ablation ADE %.3f mm\n", abl->ade_mm);
  std::cout << "wrote report to " << out << "\n";
  return 0;
}

int cmd_predict(const std::string& model_dir, const std::string& scene_file, const std::string& out) {
  const PtdModel model = load_model(fs::path(model_dir) / "model.json");
  RunConfig shown;
  shown.model = model.config;
  print_config(shown, "model.", "model.seed");
  const auto scenes = read_dataset(fs::path(scene_file));
  ensure_dir(out);
  std::ofstream lines(fs::path(out) / "predictions.jsonl", std::ios::binary);
  if (!lines) throw std::runtime_error("cannot write predictions in '" + out + "'");
  for (const auto& scene : scenes) {
    ad::Tape tape(&model.store);
    const Rollout r = rollout(tape, model, scene);
    const auto pts = rollout_points(r, model.config.coordinate_scale);
    nlohmann::json j;
    j["scene_id"] = scene.scene_id;
    j["first_predicted_step"] = r.observe + 1;
    for (std::size_t i = 0; i < scene.entities.size(); ++i) {
      const std::string id = std::to_string(scene.entities[i].id);
      nlohmann::json steps = nlohmann::json::array(), sources = nlohmann::json::array();
      for (std::size_t k = 0; k < pts.size(); ++k) {
        steps.push_back(EntityFeatures{scene.entities[i].cls, "", pts[k][i]}.flatten());
        const auto& src = r.sources[k][i];
        sources.push_back(src.transient ? "transient:" + std::to_string(scene.entities[src.center].id) : "persistent");
      }
      j["predictions"][id] = std::move(steps);
      j["sources"][id] = std::move(sources);
    }
    for (std::size_t k = 0; k < r.humans.size(); ++k) {
      const std::string id = std::to_string(scene.entities[r.humans[k]].id);
      nlohmann::json sc = nlohmann::json::array(), on = nlohmann::json::array();
      for (std::size_t t = 0; t < r.scores.size(); ++t) {
        sc.push_back(r.scores[t][k].value()[0]);
        on.push_back(static_cast<int>(r.decisions[t][k]));
      }
      j["switch_scores"][id] = std::move(sc);
      j["switch_on"][id] = std::move(on);
    }
    lines << j.dump() << "\n";
    write_attention_dump(fs::path(out) / ("attention_" + scene.scene_id + ".csv"), model, scene);
  }
  std::cout << "wrote predictions for " << scenes.size() << " scenes to " << out << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  std::cout << "# seed " << seed << "\n";
  const MicroCheck c = micro_gradcheck(seed);
  std::printf("checked %zu parameter scalars in %.2f s\n", c.result.checked, c.seconds);
  std::printf("max relative error %.3e at %s (analytic %.9g, numeric %.9g)\n", c.result.max_rel_error,
              c.result.worst.c_str(), c.result.analytic, c.result.numeric);
  const bool ok = c.result.max_rel_error < 1e-4;
  std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << "\n";
  return ok ? 0 : 1;
}

std::string key_help() {
  std::string s = "Config keys (file format: one 'key = value' per line, '#' comments):\n";
  RunConfig defaults;
  for (const auto& k : config_keys()) s += "  " + k.key + " = " + get_setting(defaults, k.key) + "    " + k.doc + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persistent-transient duality motion prediction"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);
  app.footer(key_help());

  std::string config, out, data, model_dir, scene;
  std::uint64_t seed = 1;

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen->add_option("--config", config, "config file")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "dataset file to write")->required();

  auto* tr = app.add_subcommand("train", "train the model and the persistent-only ablation");
  tr->add_option("--data", data, "dataset file")->required()->check(CLI::ExistingFile);
  tr->add_option("--config", config, "config file")->check(CLI::ExistingFile);
  tr->add_option("--out", out, "model directory to write")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a trained model directory");
  ev->add_option("--model", model_dir, "model directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--data", data, "dataset file")->required()->check(CLI::ExistingFile);
  ev->add_option("--config", config, "config file overriding the model directory's")->check(CLI::ExistingFile);
  ev->add_option("--out", out, "report directory to write")->required();

  auto* pr = app.add_subcommand("predict", "roll a trained model out on scenes");
  pr->add_option("--model", model_dir, "model directory")->required()->check(CLI::ExistingDirectory);
  pr->add_option("--scene", scene, "dataset file with the scenes")->required()->check(CLI::ExistingFile);
  pr->add_option("--out", out, "output directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full model on a micro scene");
  gc->add_option("--seed", seed, "seed for the micro scene and parameters");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(config, out);
    if (*tr) return cmd_train(data, config, out);
    if (*ev) return cmd_eval(model_dir, data, config, out);
    if (*pr) return cmd_predict(model_dir, scene, out);
    if (*gc) return cmd_gradcheck(seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
