#include "oodscore/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <system_error>

#include "oodscore/dataio.hpp"
#include "oodscore/error.hpp"
#include "oodscore/metrics.hpp"

namespace oodscore {
namespace {

using nlohmann::json;

json metrics_json(const MetricTriple& m) {
  return {{"auroc", m.auroc}, {"fpr_at_95", m.fpr_at_95}, {"aupr", m.aupr}};
}

std::string percent(double fraction) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.2f", 100.0 * fraction);
  return buf.data();
}

std::string pad(std::string s, std::size_t width, bool right) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return right ? fill + s : s + fill;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::string file_stem(std::string_view text) {
  std::string out;
  for (char c : text) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '-' || c == '.';
    out.push_back(keep ? c : '_');
  }
  return out;
}

json report_to_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows()) {
    rows.push_back({{"detector", r.detector},
                    {"id_dataset", r.id_dataset},
                    {"ood_dataset", r.ood_dataset},
                    {"auroc", r.metrics.auroc},
                    {"fpr_at_95", r.metrics.fpr_at_95},
                    {"aupr", r.metrics.aupr},
                    {"n_id", r.n_id},
                    {"n_ood", r.n_ood}});
  }
  json doc{{"rows", rows}};
  if (report.sweep) doc["sweep"] = sweep_to_json(*report.sweep);
  if (!report.iou_curve.empty()) {
    json curve = json::array();
    for (const auto& p : report.iou_curve) {
      curve.push_back({{"p", p.p ? json(*p.p) : json(nullptr)},
                       {"ood_dataset", p.ood_dataset},
                       {"iou", p.iou}});
    }
    doc["iou_curve"] = curve;
  }
  return doc;
}

std::string render_report_text(const EvalReport& report) {
  const std::array<std::string, 7> header{"detector", "ood_dataset", "FPR@95",
                                          "AUROC",    "AUPR",        "n_id",
                                          "n_ood"};
  std::vector<std::array<std::string, 7>> cells;
  for (const auto& r : report.rows()) {
    cells.push_back({r.detector, r.ood_dataset, percent(r.metrics.fpr_at_95),
                     percent(r.metrics.auroc), percent(r.metrics.aupr),
                     std::to_string(r.n_id), std::to_string(r.n_ood)});
  }
  std::array<std::size_t, 7> width{};
  for (std::size_t c = 0; c < 7; ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::array<std::string, 7>& row) {
    std::string out;
    for (std::size_t c = 0; c < 7; ++c) {
      if (c) out += "  ";
      out += pad(row[c], width[c], c >= 2);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  for (const auto& row : cells) out += line(row);
  out += "(metrics in percent; ID is the positive class)\n";
  return out;
}

json sweep_to_json(const SweepResult& sweep) {
  json records = json::array();
  for (const auto& r : sweep.records) {
    json rec = metrics_json(r.metrics);
    rec["p"] = r.p;
    rec["ood_dataset"] = r.ood_dataset;
    records.push_back(std::move(rec));
  }
  json best = json::array();
  for (const auto& b : sweep.best) {
    best.push_back({{"ood_dataset", b.ood_dataset},
                    {"best_auroc_p", b.best_auroc_p},
                    {"best_auroc", b.best_auroc},
                    {"best_fpr_p", b.best_fpr_p},
                    {"best_fpr", b.best_fpr}});
  }
  return {{"grid", sweep.grid}, {"records", records}, {"best", best}};
}

std::string render_sweep_csv(const SweepResult& sweep) {
  std::string out = "p,ood_dataset,auroc,fpr_at_95,aupr\n";
  for (const auto& r : sweep.records) {
    out += format_real(r.p) + "," + r.ood_dataset + "," +
           format_real(r.metrics.auroc) + "," +
           format_real(r.metrics.fpr_at_95) + "," +
           format_real(r.metrics.aupr) + "\n";
  }
  return out;
}

std::string render_morph_csv(const std::vector<IouPoint>& curve) {
  std::string out = "p,ood_dataset,iou\n";
  for (const auto& pt : curve) {
    out += (pt.p ? format_real(*pt.p) : std::string("raw")) + "," +
           pt.ood_dataset + "," + format_real(pt.iou) + "\n";
  }
  return out;
}

void write_benchmark_outputs(const BenchmarkRun& run,
                             const std::filesystem::path& dir,
                             std::size_t bins) {
  ensure_dir(dir);
  ensure_dir(dir / "roc");
  ensure_dir(dir / "hist");
  write_file_bytes(dir / "report.json", report_to_json(run.report).dump(2) + "\n");
  write_file_bytes(dir / "report.txt", render_report_text(run.report));
  for (const auto& task : run.tasks) {
    const std::string stem =
        file_stem(task.detector) + "__" + file_stem(task.ood_dataset) + ".csv";
    const ScoredDataset scored =
        ScoredDataset::from_split(task.id_scores, task.ood_scores);
    std::string roc = "threshold,fpr,tpr\n";
    for (const auto& pt : roc_curve(scored)) {
      roc += format_real(pt.threshold) + "," + format_real(pt.fpr) + "," +
             format_real(pt.tpr) + "\n";
    }
    write_file_bytes(dir / "roc" / stem, roc);
    const ScoreHistograms h = score_histograms(scored, bins);
    std::string hist = "bin_lo,bin_hi,id_count,ood_count\n";
    for (std::size_t b = 0; b < h.id_counts.size(); ++b) {
      hist += format_real(h.edges[b]) + "," + format_real(h.edges[b + 1]) + "," +
              std::to_string(h.id_counts[b]) + "," +
              std::to_string(h.ood_counts[b]) + "\n";
    }
    write_file_bytes(dir / "hist" / stem, hist);
  }
}

void write_sweep_outputs(const SweepResult& sweep,
                         const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_file_bytes(dir / "sweep.csv", render_sweep_csv(sweep));
  write_file_bytes(dir / "sweep.json", sweep_to_json(sweep).dump(2) + "\n");
}

void write_morph_outputs(const std::vector<IouPoint>& curve,
                         const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_file_bytes(dir / "morph_iou.csv", render_morph_csv(curve));
}

}  // namespace oodscore
