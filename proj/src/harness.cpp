#include "oodscore/harness.hpp"

#include <algorithm>
#include <set>

#include "oodscore/detectors.hpp"
#include "oodscore/error.hpp"
#include "oodscore/metrics.hpp"
#include "parallel.hpp"

namespace oodscore {
namespace {

// scores[d][0] is the ID set, scores[d][1 + t] the t-th OOD set.
using ScoreTable = std::vector<std::vector<std::vector<double>>>;

ScoreTable score_all(const Benchmark& bench,
                     const std::vector<DetectorSpec>& specs, unsigned jobs) {
  const std::size_t n_sets = 1 + bench.ood.size();
  ScoreTable table(specs.size(), std::vector<std::vector<double>>(n_sets));
  detail::parallel_for(specs.size() * n_sets, jobs, [&](std::size_t unit) {
    const std::size_t d = unit / n_sets;
    const std::size_t s = unit % n_sets;
    const FeatureMatrix& features =
        s == 0 ? bench.id.features : bench.ood[s - 1].features;
    table[d][s] = run_detector(features, bench.head, specs[d]);
  });
  return table;
}

// metrics[d][t] for every detector and OOD set.
std::vector<std::vector<MetricTriple>> evaluate_all(const Benchmark& bench,
                                                    const ScoreTable& table,
                                                    unsigned jobs) {
  const std::size_t n_tasks = bench.ood.size();
  std::vector<std::vector<MetricTriple>> out(
      table.size(), std::vector<MetricTriple>(n_tasks));
  detail::parallel_for(table.size() * n_tasks, jobs, [&](std::size_t unit) {
    const std::size_t d = unit / n_tasks;
    const std::size_t t = unit % n_tasks;
    out[d][t] = evaluate(table[d][0], table[d][1 + t], bench.target_tpr);
  });
  return out;
}

MetricTriple mean_of(const std::vector<MetricTriple>& rows) {
  MetricTriple sum;
  for (const auto& m : rows) {
    sum.auroc += m.auroc;
    sum.fpr_at_95 += m.fpr_at_95;
    sum.aupr += m.aupr;
  }
  const auto n = static_cast<double>(rows.size());
  return {sum.auroc / n, sum.fpr_at_95 / n, sum.aupr / n};
}

DetectorSpec lts_spec(double p, bool relu) {
  DetectorSpec spec;
  spec.kind = DetectorKind::kLts;
  spec.p = p;
  spec.relu_preprocess = relu;
  return spec;
}

bool resolve_relu(ReluMode mode, const Metadata& head_meta,
                  const Metadata& id_meta) {
  switch (mode) {
    case ReluMode::kOn: return true;
    case ReluMode::kOff: return false;
    case ReluMode::kAuto:
      return backbone_needs_relu(head_meta) || backbone_needs_relu(id_meta);
  }
  return false;
}

void check_dim(const NamedFeatures& set, const ClassifierHead& head,
               const std::string& field) {
  if (set.features.dim() != head.dim()) {
    throw ValidationError(field, "dataset '" + set.name + "' has dim " +
                                     std::to_string(set.features.dim()) +
                                     " but the head expects " +
                                     std::to_string(head.dim()));
  }
}

}  // namespace

void Benchmark::validate() const {
  check_dim(id, head, "id.features");
  if (ood.empty()) throw ValidationError("ood", "need at least one OOD dataset");
  for (std::size_t i = 0; i < ood.size(); ++i) {
    check_dim(ood[i], head, "ood[" + std::to_string(i) + "].features");
  }
  std::set<std::string> labels;
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    const std::string where = "detectors[" + std::to_string(i) + "]";
    try {
      detectors[i].spec.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(where + "." + e.field(), e.what());
    }
    if (!labels.insert(detectors[i].label).second) {
      throw ValidationError(where + ".name",
                            "duplicate detector label " + detectors[i].label);
    }
  }
  if (bins == 0) throw ValidationError("metrics.bins", "must be at least 1");
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) {
    throw ValidationError("metrics.target_tpr", "must lie in (0, 1]");
  }
}

Benchmark load_benchmark(const RunConfig& config) {
  config.validate();
  Benchmark bench;
  HeadDump head = read_head(config.head);
  bench.head = std::move(head.head);
  bench.head_metadata = std::move(head.metadata);
  FeatureDump id = read_feature_dump(config.id.features);
  bench.id = {config.id.name, std::move(id.features), std::move(id.metadata)};
  for (const auto& ref : config.ood) {
    FeatureDump dump = read_feature_dump(ref.features);
    bench.ood.push_back({ref.name, std::move(dump.features), std::move(dump.metadata)});
  }
  for (const auto& entry : config.detectors) {
    ResolvedDetector det;
    det.spec = entry.spec;
    det.spec.relu_preprocess =
        resolve_relu(entry.relu, bench.head_metadata, bench.id.metadata);
    if (entry.react_calibration && uses_react_threshold(entry.spec.kind)) {
      const FeatureDump calib = read_feature_dump(*entry.react_calibration);
      det.spec.react_threshold =
          react_threshold_from_percentile(calib.features, entry.react_percentile);
    }
    det.label = entry.name ? *entry.name : det.spec.label();
    bench.detectors.push_back(std::move(det));
  }
  bench.bins = config.bins;
  bench.target_tpr = config.target_tpr;
  bench.sweep_relu =
      resolve_relu(config.sweep_relu, bench.head_metadata, bench.id.metadata);
  bench.validate();
  return bench;
}

BenchmarkRun run_benchmark(const Benchmark& bench, unsigned jobs) {
  bench.validate();
  std::vector<DetectorSpec> specs;
  for (const auto& d : bench.detectors) specs.push_back(d.spec);
  const ScoreTable table = score_all(bench, specs, jobs);
  const auto metrics = evaluate_all(bench, table, jobs);

  BenchmarkRun run;
  std::vector<ReportRow> rows;
  const std::size_t n_id = bench.id.features.n_samples();
  for (std::size_t d = 0; d < specs.size(); ++d) {
    const std::string& label = bench.detectors[d].label;
    std::size_t total_ood = 0;
    for (std::size_t t = 0; t < bench.ood.size(); ++t) {
      const std::size_t n_ood = bench.ood[t].features.n_samples();
      total_ood += n_ood;
      rows.push_back({label, bench.id.name, bench.ood[t].name, metrics[d][t],
                      n_id, n_ood});
      run.tasks.push_back({label, bench.ood[t].name, table[d][0], table[d][1 + t]});
    }
    rows.push_back({label, bench.id.name, std::string(kAverageTask),
                    mean_of(metrics[d]), n_id, total_ood});
  }
  run.report = EvalReport(std::move(rows));
  return run;
}

EvalReport run_benchmark(const RunConfig& config, unsigned jobs) {
  return run_benchmark(load_benchmark(config), jobs).report;
}

SweepResult sweep_p(const Benchmark& bench, std::vector<double> grid,
                    unsigned jobs) {
  if (grid.empty() || grid.back() != 1.0) grid.push_back(1.0);
  validate_grid(grid, "grid");
  bench.validate();
  std::vector<DetectorSpec> specs;
  for (double p : grid) specs.push_back(lts_spec(p, bench.sweep_relu));
  const ScoreTable table = score_all(bench, specs, jobs);
  const auto metrics = evaluate_all(bench, table, jobs);

  SweepResult result;
  result.grid = grid;
  std::vector<std::string> tasks;
  for (const auto& o : bench.ood) tasks.push_back(o.name);
  tasks.emplace_back(kAverageTask);

  std::vector<std::vector<MetricTriple>> per_task(tasks.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t t = 0; t < bench.ood.size(); ++t) {
      result.records.push_back({grid[g], tasks[t], metrics[g][t]});
      per_task[t].push_back(metrics[g][t]);
    }
    const MetricTriple avg = mean_of(metrics[g]);
    result.records.push_back({grid[g], std::string(kAverageTask), avg});
    per_task.back().push_back(avg);
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    SweepBest best{tasks[t], grid[0], per_task[t][0].auroc, grid[0],
                   per_task[t][0].fpr_at_95};
    for (std::size_t g = 1; g < grid.size(); ++g) {
      if (per_task[t][g].auroc > best.best_auroc) {
        best.best_auroc = per_task[t][g].auroc;
        best.best_auroc_p = grid[g];
      }
      if (per_task[t][g].fpr_at_95 < best.best_fpr) {
        best.best_fpr = per_task[t][g].fpr_at_95;
        best.best_fpr_p = grid[g];
      }
    }
    result.best.push_back(best);
  }
  result.validate();
  return result;
}

std::vector<IouPoint> morph_iou(const Benchmark& bench,
                                const std::vector<double>& grid,
                                std::size_t bins, unsigned jobs) {
  validate_grid(grid, "grid");
  if (bins == 0) throw ValidationError("bins", "must be at least 1");
  bench.validate();
  std::vector<DetectorSpec> specs{DetectorSpec{DetectorKind::kEnergy}};
  for (double p : grid) specs.push_back(lts_spec(p, bench.sweep_relu));
  const ScoreTable table = score_all(bench, specs, jobs);

  std::vector<IouPoint> curve;
  for (std::size_t d = 0; d < specs.size(); ++d) {
    for (std::size_t t = 0; t < bench.ood.size(); ++t) {
      IouPoint point;
      if (d > 0) point.p = grid[d - 1];
      point.ood_dataset = bench.ood[t].name;
      point.iou = distribution_iou(table[d][0], table[d][1 + t], bins);
      curve.push_back(std::move(point));
    }
  }
  return curve;
}

}  // namespace oodscore
