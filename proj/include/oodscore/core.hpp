#pragma once

// Domain types shared by every module. All types validate on construction and
// are immutable afterwards, so they can be shared freely between threads.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oodscore {

/// Row-major matrix of penultimate-layer activations, one row per sample.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t n_samples, std::size_t dim,
                std::vector<double> data);

  std::size_t n_samples() const noexcept { return n_samples_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  const std::vector<double>& data() const noexcept { return data_; }

 private:
  std::size_t n_samples_ = 0;
  std::size_t dim_ = 1;
  std::vector<double> data_;
};

/// Final affine layer: logits = weights * h + bias.
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(std::size_t n_classes, std::size_t dim,
                 std::vector<double> weights, std::vector<double> bias);

  std::size_t n_classes() const noexcept { return n_classes_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> weight_row(std::size_t c) const {
    return {weights_.data() + c * dim_, dim_};
  }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& bias() const noexcept { return bias_; }

 private:
  std::size_t n_classes_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

class Logits {
 public:
  Logits() = default;
  Logits(std::size_t n_samples, std::size_t n_classes,
         std::vector<double> values);

  std::size_t n_samples() const noexcept { return n_samples_; }
  std::size_t n_classes() const noexcept { return n_classes_; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * n_classes_, n_classes_};
  }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::size_t n_samples_ = 0;
  std::size_t n_classes_ = 0;
  std::vector<double> values_;
};

enum class DetectorKind {
  kMsp,
  kEnergy,
  kLts,
  kReact,
  kReactLts,
  kAshP,
  kAshB,
  kAshS,
  kScale,
};

std::string_view to_string(DetectorKind kind) noexcept;
/// Accepts the snake_case names used in configs and on the command line
/// ("msp", "energy", "lts", "react", "react_lts", "ash_p", "ash_b", "ash_s",
/// "scale"). Throws ValidationError("kind") otherwise.
DetectorKind parse_detector_kind(std::string_view name);

bool uses_top_fraction(DetectorKind kind) noexcept;
bool uses_react_threshold(DetectorKind kind) noexcept;

inline constexpr double kDefaultTopFraction = 0.05;

struct DetectorSpec {
  DetectorKind kind = DetectorKind::kEnergy;
  double p = kDefaultTopFraction;
  double react_threshold = 1.0;
  bool relu_preprocess = false;

  /// Throws ValidationError naming "p" or "react_threshold".
  void validate() const;

  /// Short stable label, e.g. "energy", "lts[p=0.05]", "react_lts[p=0.05,c=1]".
  std::string label() const;

  friend bool operator==(const DetectorSpec&, const DetectorSpec&) = default;
};

enum class SampleLabel { kId, kOod };

/// Per-sample scores, oriented so that higher means more in-distribution.
class ScoredDataset {
 public:
  ScoredDataset() = default;
  ScoredDataset(std::vector<double> scores, std::vector<SampleLabel> labels,
                DetectorSpec detector = {}, std::string id_source = {},
                std::string ood_source = {});

  /// Concatenates ID then OOD scores with matching labels.
  static ScoredDataset from_split(std::span<const double> id_scores,
                                  std::span<const double> ood_scores,
                                  DetectorSpec detector = {},
                                  std::string id_source = {},
                                  std::string ood_source = {});

  const std::vector<double>& scores() const noexcept { return scores_; }
  const std::vector<SampleLabel>& labels() const noexcept { return labels_; }
  const DetectorSpec& detector() const noexcept { return detector_; }
  const std::string& id_source() const noexcept { return id_source_; }
  const std::string& ood_source() const noexcept { return ood_source_; }

  std::size_t n_id() const noexcept { return n_id_; }
  std::size_t n_ood() const noexcept { return scores_.size() - n_id_; }
  std::vector<double> id_scores() const;
  std::vector<double> ood_scores() const;

 private:
  std::vector<double> scores_;
  std::vector<SampleLabel> labels_;
  DetectorSpec detector_;
  std::string id_source_;
  std::string ood_source_;
  std::size_t n_id_ = 0;
};

struct MetricTriple {
  double auroc = 0.0;
  double fpr_at_95 = 0.0;
  double aupr = 0.0;

  friend bool operator==(const MetricTriple&, const MetricTriple&) = default;
};

struct ReportRow {
  std::string detector;
  std::string id_dataset;
  std::string ood_dataset;
  MetricTriple metrics;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

inline constexpr std::string_view kAverageTask = "Average";

struct SweepRecord {
  double p = 0.0;
  std::string ood_dataset;
  MetricTriple metrics;

  friend bool operator==(const SweepRecord&, const SweepRecord&) = default;
};

struct SweepBest {
  std::string ood_dataset;
  double best_auroc_p = 0.0;
  double best_auroc = 0.0;
  double best_fpr_p = 0.0;
  double best_fpr = 0.0;

  friend bool operator==(const SweepBest&, const SweepBest&) = default;
};

/// Metrics for LTS over a strictly increasing grid of top fractions.
struct SweepResult {
  std::vector<double> grid;
  std::vector<SweepRecord> records;  // grid-major, tasks in config order
  std::vector<SweepBest> best;       // one per task, "Average" last

  void validate() const;
  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

/// One entry of an IoU morphing curve. `p` is empty for raw energy.
struct IouPoint {
  std::optional<double> p;
  std::string ood_dataset;
  double iou = 0.0;

  friend bool operator==(const IouPoint&, const IouPoint&) = default;
};

class EvalReport {
 public:
  EvalReport() = default;
  explicit EvalReport(std::vector<ReportRow> rows);

  const std::vector<ReportRow>& rows() const noexcept { return rows_; }
  const ReportRow* find(std::string_view detector,
                        std::string_view ood_dataset) const;

  std::optional<SweepResult> sweep;
  std::vector<IouPoint> iou_curve;

 private:
  std::vector<ReportRow> rows_;
};

}  // namespace oodscore
