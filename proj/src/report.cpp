#include "ptd/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ptd {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string mm(double v) { return fmt("%.6f", v); }

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

void write_horizon_csv(const std::filesystem::path& path, const EvalReport& ptd, const EvalReport* ablation) {
  if (ablation && ablation->horizon != ptd.horizon) throw std::invalid_argument("report: horizon mismatch");
  std::string s = "step,error_mm,human_error_mm,object_error_mm";
  if (ablation) s += ",ablation_error_mm,ablation_human_error_mm,ablation_object_error_mm";
  s += "\n";
  for (std::size_t k = 0; k < ptd.horizon; ++k) {
    s += std::to_string(k + 1) + "," + mm(ptd.error_mm[k]) + "," + mm(ptd.human_error_mm[k]) + "," +
         mm(ptd.object_error_mm[k]);
    if (ablation) {
      s += "," + mm(ablation->error_mm[k]) + "," + mm(ablation->human_error_mm[k]) + "," +
           mm(ablation->object_error_mm[k]);
    }
    s += "\n";
  }
  write_text(path, s);
}

void write_switch_summary(const std::filesystem::path& path, const EvalReport& ptd, const EvalReport* ablation) {
  const auto& c = ptd.switch_counts;
  std::string s;
  s += "scenes = " + std::to_string(ptd.scenes.size()) + "\n";
  s += "ade_mm = " + mm(ptd.ade_mm) + "\n";
  s += "ade_human_mm = " + mm(ptd.ade_human_mm) + "\n";
  s += "ade_object_mm = " + mm(ptd.ade_object_mm) + "\n";
  if (ablation) {
    s += "ablation_ade_mm = " + mm(ablation->ade_mm) + "\n";
    s += "ablation_ade_human_mm = " + mm(ablation->ade_human_mm) + "\n";
    s += "ablation_ade_object_mm = " + mm(ablation->ade_object_mm) + "\n";
  }
  s += "switch_tp = " + std::to_string(c.tp) + "\n";
  s += "switch_fp = " + std::to_string(c.fp) + "\n";
  s += "switch_fn = " + std::to_string(c.fn) + "\n";
  s += "switch_tn = " + std::to_string(c.tn) + "\n";
  s += "switch_precision = " + fmt("%.6f", c.precision()) + "\n";
  s += "switch_recall = " + fmt("%.6f", c.recall()) + "\n";
  s += "switch_f1 = " + fmt("%.6f", c.f1()) + "\n";
  s += "zero_positive_convention = precision and recall are 1 when their denominator is 0\n";
  s += "predictions_from_persistent = " + std::to_string(ptd.from_persistent) + "\n";
  s += "predictions_from_transient = " + std::to_string(ptd.from_transient) + "\n";
  write_text(path, s);
}

void write_scene_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::string s = "scene_id,has_interaction,ade_mm,switch_tp,switch_fp,switch_fn,switch_tn,from_persistent,from_transient\n";
  for (const auto& e : report.scenes) {
    s += e.scene_id + "," + (e.has_interaction ? "1" : "0") + "," + mm(e.ade()) + "," +
         std::to_string(e.switch_counts.tp) + "," + std::to_string(e.switch_counts.fp) + "," +
         std::to_string(e.switch_counts.fn) + "," + std::to_string(e.switch_counts.tn) + "," +
         std::to_string(e.from_persistent) + "," + std::to_string(e.from_transient) + "\n";
  }
  write_text(path, s);
}

void write_chart_svg(const std::filesystem::path& path, const EvalReport& ptd, const EvalReport* ablation) {
  const double w = 640, h = 400, left = 70, right = 20, top = 40, bottom = 50;
  const std::size_t n = ptd.horizon;
  double ymax = 0.0;
  for (double v : ptd.error_mm) ymax = std::max(ymax, v);
  if (ablation)
    for (double v : ablation->error_mm) ymax = std::max(ymax, v);
  ymax = ymax > 0.0 ? ymax * 1.1 : 1.0;
  auto x_at = [&](std::size_t k) { return left + (n > 1 ? (w - left - right) * k / double(n - 1) : 0.0); };
  auto y_at = [&](double v) { return h - bottom - (h - top - bottom) * v / ymax; };
  auto polyline = [&](const std::vector<double>& ys, const char* id, const char* color) {
    std::string s = std::string("  <polyline id=\"") + id + "\" fill=\"none\" stroke=\"" + color +
                    "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < ys.size(); ++k) {
      if (k) s += " ";
      s += fmt("%.2f", x_at(k)) + "," + fmt("%.2f", y_at(ys[k]));
    }
    return s + "\"/>\n";
  };

  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  s += "  <rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  s += "  <text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       "Prediction error vs horizon</text>\n";
  s += "  <line x1=\"" + fmt("%.0f", left) + "\" y1=\"" + fmt("%.0f", h - bottom) + "\" x2=\"" + fmt("%.0f", w - right) +
       "\" y2=\"" + fmt("%.0f", h - bottom) + "\" stroke=\"black\"/>\n";
  s += "  <line x1=\"" + fmt("%.0f", left) + "\" y1=\"" + fmt("%.0f", top) + "\" x2=\"" + fmt("%.0f", left) +
       "\" y2=\"" + fmt("%.0f", h - bottom) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = ymax * i / 4.0;
    s += "  <text x=\"" + fmt("%.0f", left - 6) + "\" y=\"" + fmt("%.2f", y_at(v) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fmt("%.0f", v) + "</text>\n";
  }
  for (std::size_t k = 0; k < n; ++k) {
    s += "  <text x=\"" + fmt("%.2f", x_at(k)) + "\" y=\"" + fmt("%.0f", h - bottom + 16) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + std::to_string(k + 1) + "</text>\n";
  }
  s += "  <text x=\"" + fmt("%.0f", (left + w - right) / 2) + "\" y=\"" + fmt("%.0f", h - 12) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">horizon step</text>\n";
  s += "  <text x=\"16\" y=\"" + fmt("%.0f", (top + h - bottom) / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " +
       fmt("%.0f", (top + h - bottom) / 2) + ")\">mean error (mm)</text>\n";
  s += polyline(ptd.error_mm, "series-ptd", "#c0392b");
  s += "  <text x=\"" + fmt("%.0f", left + 12) + "\" y=\"" + fmt("%.0f", top + 12) +
       "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#c0392b\">PTD</text>\n";
  if (ablation) {
    s += polyline(ablation->error_mm, "series-ablation", "#2c3e50");
    s += "  <text x=\"" + fmt("%.0f", left + 12) + "\" y=\"" + fmt("%.0f", top + 28) +
         "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#2c3e50\">persistent-only</text>\n";
  }
  s += "</svg>\n";
  write_text(path, s);
}

std::string attention_dump(const PtdModel& model, const Scene& scene) {
  ad::Tape tape(&model.store);
  StepOptions opts;
  opts.diagnostics = true;
  const Rollout r = rollout(tape, model, scene, opts);
  auto id = [&](std::size_t i) { return std::to_string(scene.entities.at(i).id); };
  std::string s = "step,kind,center,entity,value\n";
  auto row = [&](std::size_t step, const char* kind, const std::string& c, const std::string& e, const std::string& v) {
    s += std::to_string(step) + "," + kind + "," + c + "," + e + "," + v + "\n";
  };
  const auto g = [](double v) { return fmt("%.9g", v); };
  for (std::size_t t = 0; t < r.diagnostics.size(); ++t) {
    const auto& d = r.diagnostics[t];
    const std::size_t step = t + 1;
    const std::size_t n = scene.entities.size();
    if (d.persistent_attention.size() == n * n) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j) row(step, "persistent_attention", id(i), id(j), g(d.persistent_attention[i * n + j]));
    }
    for (std::size_t k = 0; k < r.humans.size() && t < r.scores.size(); ++k) {
      const std::size_t h = r.humans[k];
      row(step, "switch_score", id(h), "", g(r.scores[t][k].value()[0]));
      row(step, "switch_on", id(h), "", r.decisions[t][k] ? "1" : "0");
      if (d.gamma.count(h)) row(step, "gamma", id(h), "", g(d.gamma.at(h)));
      if (d.switch_attention.count(h)) {
        const Tensor& a = d.switch_attention.at(h);
        std::size_t col = 0;
        for (std::size_t l = 0; l < n && col < a.size(); ++l)
          if (l != h) row(step, "switch_attention", id(h), id(l), g(a[col++]));
      }
    }
    for (const auto& sd : d.sessions) {
      for (std::size_t l : sd.inward) row(step, "inward_edge", id(sd.center), id(l), "1");
      for (std::size_t l : sd.outward) row(step, "outward_edge", id(sd.center), id(l), "1");
      for (std::size_t k = 0; k < sd.inward.size() && k < sd.inward_attention.size(); ++k)
        row(step, "transient_attention", id(sd.center), id(sd.inward[k]), g(sd.inward_attention[k]));
      row(step, "message_norm_p2t", id(sd.center), "", g(sd.from_persistent_norm));
      row(step, "message_norm_t2p", id(sd.center), "", g(sd.to_persistent_norm));
    }
  }
  return s;
}

void write_attention_dump(const std::filesystem::path& path, const PtdModel& model, const Scene& scene) {
  write_text(path, attention_dump(model, scene));
}

}  // namespace ptd
