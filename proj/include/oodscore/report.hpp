#pragma once

// Report artifacts. Everything written here is a pure function of its input,
// so files are byte-stable across runs and job counts.
//
// Files written by write_benchmark_outputs into the output directory:
//   report.json               rows as fractions
//   report.txt                aligned table, metrics as percentages
//   roc/<detector>__<ood>.csv       threshold,fpr,tpr
//   hist/<detector>__<ood>.csv      bin_lo,bin_hi,id_count,ood_count
// write_sweep_outputs: sweep.csv, sweep.json
// write_morph_outputs: morph_iou.csv

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "oodscore/core.hpp"
#include "oodscore/harness.hpp"

namespace oodscore {

nlohmann::json report_to_json(const EvalReport& report);
std::string render_report_text(const EvalReport& report);

nlohmann::json sweep_to_json(const SweepResult& sweep);
std::string render_sweep_csv(const SweepResult& sweep);
std::string render_morph_csv(const std::vector<IouPoint>& curve);

/// Detector labels and dataset names made safe for file names.
std::string file_stem(std::string_view text);

void write_benchmark_outputs(const BenchmarkRun& run,
                             const std::filesystem::path& dir, std::size_t bins);
void write_sweep_outputs(const SweepResult& sweep,
                         const std::filesystem::path& dir);
void write_morph_outputs(const std::vector<IouPoint>& curve,
                         const std::filesystem::path& dir);

/// Shortest round-trip decimal form of a double.
std::string format_real(double v);

}  // namespace oodscore
