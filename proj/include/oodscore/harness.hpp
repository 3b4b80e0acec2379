#pragma once

// Benchmark orchestration: every detector is scored on the ID set and on each
// OOD set, then evaluated per (detector, OOD set) task. Work units run
// concurrently but results are assembled in a fixed order, so reports do not
// depend on the number of jobs.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oodscore/config.hpp"
#include "oodscore/core.hpp"
#include "oodscore/dataio.hpp"

namespace oodscore {

struct NamedFeatures {
  std::string name;
  FeatureMatrix features;
  Metadata metadata = Metadata::object();
};

struct ResolvedDetector {
  std::string label;
  DetectorSpec spec;
};

/// Fully loaded, validated benchmark held in memory.
struct Benchmark {
  NamedFeatures id;
  std::vector<NamedFeatures> ood;
  ClassifierHead head;
  Metadata head_metadata = Metadata::object();
  std::vector<ResolvedDetector> detectors;
  std::size_t bins = 50;
  double target_tpr = 0.95;
  bool sweep_relu = false;

  /// Dimension agreement, unique labels, valid specs.
  void validate() const;
};

/// Reads every file named by `config`, resolves ReLU "auto" settings and
/// ReAct calibration percentiles, and checks all shapes. Any problem is
/// reported here, before scoring starts.
Benchmark load_benchmark(const RunConfig& config);

struct TaskScores {
  std::string detector;
  std::string ood_dataset;
  std::vector<double> id_scores;
  std::vector<double> ood_scores;
};

struct BenchmarkRun {
  EvalReport report;
  std::vector<TaskScores> tasks;  // detector-major, OOD sets in config order
};

/// Report rows are detector-major; each detector's task rows are followed by
/// an "Average" row holding the unweighted mean over OOD sets.
BenchmarkRun run_benchmark(const Benchmark& bench, unsigned jobs = 1);
EvalReport run_benchmark(const RunConfig& config, unsigned jobs = 1);

/// LTS metrics at each grid value. 1.0 is appended when absent so the
/// energy-equivalent anchor is always present.
SweepResult sweep_p(const Benchmark& bench, std::vector<double> grid,
                    unsigned jobs = 1);

/// ID/OOD score-histogram IoU for raw energy (first, p empty) and for LTS at
/// each grid value, per OOD set.
std::vector<IouPoint> morph_iou(const Benchmark& bench,
                                const std::vector<double>& grid,
                                std::size_t bins, unsigned jobs = 1);

}  // namespace oodscore
