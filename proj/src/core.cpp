#include "oodscore/core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>
#include <utility>

#include "oodscore/error.hpp"

namespace oodscore {

const char* to_string(FormatErrorKind kind) noexcept {
  switch (kind) {
    case FormatErrorKind::kBadMagic: return "bad magic";
    case FormatErrorKind::kUnknownVersion: return "unknown version";
    case FormatErrorKind::kTruncated: return "truncated";
    case FormatErrorKind::kSizeOverflow: return "size overflow";
    case FormatErrorKind::kNonFinite: return "non-finite value";
    case FormatErrorKind::kBadMetadata: return "bad metadata";
    case FormatErrorKind::kTrailingData: return "trailing data";
  }
  return "unknown";
}

FormatError::FormatError(FormatErrorKind kind, std::uint64_t offset,
                         const std::string& detail)
    : Error(std::string(to_string(kind)) + " at byte offset " +
            std::to_string(offset) + (detail.empty() ? "" : ": " + detail)),
      kind_(kind),
      offset_(offset) {}

CsvError::CsvError(std::size_t row, std::size_t column,
                   const std::string& detail)
    : Error("csv row " + std::to_string(row) + ", column " +
            std::to_string(column) + ": " + detail),
      row_(row),
      column_(column) {}

namespace {

void require_finite(std::span<const double> values, const char* field) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError(field, "non-finite entry at flat index " +
                                       std::to_string(i));
    }
  }
}

void require_size(std::size_t actual, std::size_t expected,
                  const char* field) {
  if (actual != expected) {
    throw ValidationError(field, "expected " + std::to_string(expected) +
                                     " entries, got " +
                                     std::to_string(actual));
  }
}

std::string format_number(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t n_samples, std::size_t dim,
                             std::vector<double> data)
    : n_samples_(n_samples), dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw ValidationError("dim", "must be at least 1");
  require_size(data_.size(), n_samples_ * dim_, "data");
  require_finite(data_, "data");
}

ClassifierHead::ClassifierHead(std::size_t n_classes, std::size_t dim,
                               std::vector<double> weights,
                               std::vector<double> bias)
    : n_classes_(n_classes),
      dim_(dim),
      weights_(std::move(weights)),
      bias_(std::move(bias)) {
  if (n_classes_ == 0) throw ValidationError("n_classes", "must be at least 1");
  if (dim_ == 0) throw ValidationError("dim", "must be at least 1");
  require_size(weights_.size(), n_classes_ * dim_, "weights");
  require_size(bias_.size(), n_classes_, "bias");
  require_finite(weights_, "weights");
  require_finite(bias_, "bias");
}

Logits::Logits(std::size_t n_samples, std::size_t n_classes,
               std::vector<double> values)
    : n_samples_(n_samples), n_classes_(n_classes), values_(std::move(values)) {
  if (n_classes_ == 0) throw ValidationError("n_classes", "must be at least 1");
  require_size(values_.size(), n_samples_ * n_classes_, "values");
  require_finite(values_, "values");
}

namespace {

constexpr std::array<std::pair<DetectorKind, std::string_view>, 9>
    kDetectorNames{{
        {DetectorKind::kMsp, "msp"},
        {DetectorKind::kEnergy, "energy"},
        {DetectorKind::kLts, "lts"},
        {DetectorKind::kReact, "react"},
        {DetectorKind::kReactLts, "react_lts"},
        {DetectorKind::kAshP, "ash_p"},
        {DetectorKind::kAshB, "ash_b"},
        {DetectorKind::kAshS, "ash_s"},
        {DetectorKind::kScale, "scale"},
    }};

}  // namespace

std::string_view to_string(DetectorKind kind) noexcept {
  for (const auto& [k, name] : kDetectorNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

DetectorKind parse_detector_kind(std::string_view name) {
  for (const auto& [k, n] : kDetectorNames) {
    if (n == name) return k;
  }
  throw ValidationError("kind", "unknown detector '" + std::string(name) + "'");
}

bool uses_top_fraction(DetectorKind kind) noexcept {
  switch (kind) {
    case DetectorKind::kLts:
    case DetectorKind::kReactLts:
    case DetectorKind::kAshP:
    case DetectorKind::kAshB:
    case DetectorKind::kAshS:
    case DetectorKind::kScale:
      return true;
    default:
      return false;
  }
}

bool uses_react_threshold(DetectorKind kind) noexcept {
  return kind == DetectorKind::kReact || kind == DetectorKind::kReactLts;
}

void DetectorSpec::validate() const {
  if (uses_top_fraction(kind) && !(p > 0.0 && p <= 1.0)) {
    throw ValidationError("p", "must lie in (0, 1], got " + format_number(p));
  }
  if (uses_react_threshold(kind) &&
      !(react_threshold > 0.0 && std::isfinite(react_threshold))) {
    throw ValidationError("react_threshold",
                          "must be a finite positive number, got " +
                              format_number(react_threshold));
  }
}

std::string DetectorSpec::label() const {
  std::string out(to_string(kind));
  std::vector<std::string> parts;
  if (uses_top_fraction(kind)) parts.push_back("p=" + format_number(p));
  if (uses_react_threshold(kind)) {
    parts.push_back("c=" + format_number(react_threshold));
  }
  if (relu_preprocess &&
      (kind == DetectorKind::kLts || kind == DetectorKind::kReactLts)) {
    parts.push_back("relu");
  }
  if (!parts.empty()) {
    out += '[';
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += ',';
      out += parts[i];
    }
    out += ']';
  }
  return out;
}

ScoredDataset::ScoredDataset(std::vector<double> scores,
                             std::vector<SampleLabel> labels,
                             DetectorSpec detector, std::string id_source,
                             std::string ood_source)
    : scores_(std::move(scores)),
      labels_(std::move(labels)),
      detector_(detector),
      id_source_(std::move(id_source)),
      ood_source_(std::move(ood_source)) {
  require_size(labels_.size(), scores_.size(), "labels");
  require_finite(scores_, "scores");
  n_id_ = static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), SampleLabel::kId));
}

ScoredDataset ScoredDataset::from_split(std::span<const double> id_scores,
                                        std::span<const double> ood_scores,
                                        DetectorSpec detector,
                                        std::string id_source,
                                        std::string ood_source) {
  std::vector<double> scores(id_scores.begin(), id_scores.end());
  scores.insert(scores.end(), ood_scores.begin(), ood_scores.end());
  std::vector<SampleLabel> labels(id_scores.size(), SampleLabel::kId);
  labels.resize(scores.size(), SampleLabel::kOod);
  return ScoredDataset(std::move(scores), std::move(labels), detector,
                       std::move(id_source), std::move(ood_source));
}

std::vector<double> ScoredDataset::id_scores() const {
  std::vector<double> out;
  out.reserve(n_id());
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    if (labels_[i] == SampleLabel::kId) out.push_back(scores_[i]);
  }
  return out;
}

std::vector<double> ScoredDataset::ood_scores() const {
  std::vector<double> out;
  out.reserve(n_ood());
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    if (labels_[i] == SampleLabel::kOod) out.push_back(scores_[i]);
  }
  return out;
}

namespace {

void require_fraction(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValidationError(field, "must lie in [0, 1], got " + format_number(v));
  }
}

void require_metrics(const MetricTriple& m) {
  require_fraction(m.auroc, "auroc");
  require_fraction(m.fpr_at_95, "fpr_at_95");
  require_fraction(m.aupr, "aupr");
}

}  // namespace

void SweepResult::validate() const {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 1.0)) {
      throw ValidationError("grid", "values must lie in (0, 1]");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw ValidationError("grid", "must be strictly increasing");
    }
  }
  std::set<std::pair<double, std::string>> seen;
  for (const auto& r : records) {
    require_metrics(r.metrics);
    if (!seen.emplace(r.p, r.ood_dataset).second) {
      throw ValidationError("records", "duplicate (p, task) record for " +
                                           r.ood_dataset);
    }
  }
}

EvalReport::EvalReport(std::vector<ReportRow> rows) : rows_(std::move(rows)) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : rows_) {
    require_metrics(r.metrics);
    if (!seen.emplace(r.detector, r.ood_dataset).second) {
      throw ValidationError("rows", "duplicate row for detector " +
                                        r.detector + " on " + r.ood_dataset);
    }
  }
}

const ReportRow* EvalReport::find(std::string_view detector,
                                  std::string_view ood_dataset) const {
  for (const auto& r : rows_) {
    if (r.detector == detector && r.ood_dataset == ood_dataset) return &r;
  }
  return nullptr;
}

}  // namespace oodscore
