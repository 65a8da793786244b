#pragma once

#include <filesystem>
#include <string>

#include "ptd/evaluation.hpp"

// Report files written by `eval`: error-vs-horizon table, switch summary,
// per-scene breakdown, an SVG chart of both models and an attention/edge dump.
namespace ptd {

void write_horizon_csv(const std::filesystem::path& path, const EvalReport& ptd, const EvalReport* ablation);
void write_switch_summary(const std::filesystem::path& path, const EvalReport& ptd, const EvalReport* ablation);
void write_scene_csv(const std::filesystem::path& path, const EvalReport& report);
void write_chart_svg(const std::filesystem::path& path, const EvalReport& ptd, const EvalReport* ablation);

// Per-step edge sets, attention weights, switch scores and message norms of
// one scene's rollout, as `step,kind,center,entity,value` rows.
std::string attention_dump(const PtdModel& model, const Scene& scene);
void write_attention_dump(const std::filesystem::path& path, const PtdModel& model, const Scene& scene);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ptd
