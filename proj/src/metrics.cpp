#include "oodscore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "oodscore/error.hpp"

namespace oodscore {
namespace {

void require_both_classes(std::size_t n_id, std::size_t n_ood) {
  if (n_id == 0) throw EvaluationError("no in-distribution samples to evaluate");
  if (n_ood == 0) throw EvaluationError("no out-of-distribution samples to evaluate");
}

struct Labeled {
  double score;
  bool is_id;
};

// All samples sorted by descending score.
std::vector<Labeled> sorted_desc(std::span<const double> id_scores,
                                 std::span<const double> ood_scores) {
  std::vector<Labeled> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, true});
  for (double s : ood_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Labeled& a, const Labeled& b) { return a.score > b.score; });
  return all;
}

// Calls visit(threshold, tp, fp) at the end of each block of tied scores,
// where tp/fp count ID/OOD samples scoring >= threshold.
template <typename Visit>
void for_each_threshold(const std::vector<Labeled>& sorted, Visit&& visit) {
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == t; ++i) {
      (sorted[i].is_id ? tp : fp) += 1;
    }
    visit(t, tp, fp);
  }
}

}  // namespace

double auroc(std::span<const double> id_scores,
             std::span<const double> ood_scores) {
  require_both_classes(id_scores.size(), ood_scores.size());
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end());
  // Twice the Mann-Whitney U, kept integral so ties are exact.
  std::uint64_t twice_u = 0;
  for (double s : id_scores) {
    const auto lower = std::lower_bound(ood.begin(), ood.end(), s);
    const auto upper = std::upper_bound(lower, ood.end(), s);
    twice_u += 2 * static_cast<std::uint64_t>(lower - ood.begin()) +
               static_cast<std::uint64_t>(upper - lower);
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(id_scores.size()) *
          static_cast<double>(ood_scores.size()));
}

double auroc(const ScoredDataset& scored) {
  return auroc(scored.id_scores(), scored.ood_scores());
}

double fpr_at_tpr(std::span<const double> id_scores,
                  std::span<const double> ood_scores, double target_tpr) {
  require_both_classes(id_scores.size(), ood_scores.size());
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) {
    throw ValidationError("target_tpr", "must lie in (0, 1]");
  }
  std::vector<double> id(id_scores.begin(), id_scores.end());
  std::sort(id.begin(), id.end(), std::greater<>());
  const double n_id = static_cast<double>(id.size());
  // Smallest count of accepted ID samples reaching the target.
  std::size_t needed = 1;
  while (static_cast<double>(needed) / n_id < target_tpr) ++needed;
  const double threshold = id[needed - 1];
  const auto false_pos = std::count_if(
      ood_scores.begin(), ood_scores.end(),
      [threshold](double s) { return s >= threshold; });
  return static_cast<double>(false_pos) /
         static_cast<double>(ood_scores.size());
}

double fpr_at_tpr(const ScoredDataset& scored, double target_tpr) {
  return fpr_at_tpr(scored.id_scores(), scored.ood_scores(), target_tpr);
}

double aupr(std::span<const double> id_scores,
            std::span<const double> ood_scores) {
  require_both_classes(id_scores.size(), ood_scores.size());
  const double n_id = static_cast<double>(id_scores.size());
  double ap = 0.0;
  double prev_recall = 0.0;
  for_each_threshold(sorted_desc(id_scores, ood_scores),
                     [&](double, std::size_t tp, std::size_t fp) {
                       const double recall = static_cast<double>(tp) / n_id;
                       const double precision =
                           static_cast<double>(tp) /
                           static_cast<double>(tp + fp);
                       ap += (recall - prev_recall) * precision;
                       prev_recall = recall;
                     });
  return ap;
}

double aupr(const ScoredDataset& scored) {
  return aupr(scored.id_scores(), scored.ood_scores());
}

MetricTriple evaluate(std::span<const double> id_scores,
                      std::span<const double> ood_scores, double target_tpr) {
  return {auroc(id_scores, ood_scores),
          fpr_at_tpr(id_scores, ood_scores, target_tpr),
          aupr(id_scores, ood_scores)};
}

std::vector<RocPoint> roc_curve(const ScoredDataset& scored) {
  require_both_classes(scored.n_id(), scored.n_ood());
  const auto id = scored.id_scores();
  const auto ood = scored.ood_scores();
  const double n_id = static_cast<double>(id.size());
  const double n_ood = static_cast<double>(ood.size());
  std::vector<RocPoint> curve{
      {std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  for_each_threshold(sorted_desc(id, ood),
                     [&](double t, std::size_t tp, std::size_t fp) {
                       curve.push_back({t, static_cast<double>(tp) / n_id,
                                        static_cast<double>(fp) / n_ood});
                     });
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) *
            (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  }
  return area;
}

ScoreHistograms score_histograms(std::span<const double> id_scores,
                                 std::span<const double> ood_scores,
                                 std::size_t bins) {
  require_both_classes(id_scores.size(), ood_scores.size());
  if (bins == 0) throw ValidationError("bins", "must be at least 1");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (auto set : {id_scores, ood_scores}) {
    for (double s : set) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  ScoreHistograms out;
  out.edges.resize(bins + 1);
  const double span = hi - lo;
  for (std::size_t i = 0; i <= bins; ++i) {
    out.edges[i] = lo + span * static_cast<double>(i) / static_cast<double>(bins);
  }
  out.edges.back() = hi;
  auto fill = [&](std::span<const double> set, std::vector<std::size_t>& counts) {
    counts.assign(bins, 0);
    for (double s : set) {
      const double pos = (s - lo) / span * static_cast<double>(bins);
      const auto b = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, pos)));
      ++counts[b];
    }
  };
  fill(id_scores, out.id_counts);
  fill(ood_scores, out.ood_counts);
  return out;
}

ScoreHistograms score_histograms(const ScoredDataset& scored,
                                 std::size_t bins) {
  return score_histograms(scored.id_scores(), scored.ood_scores(), bins);
}

double histogram_iou(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ValidationError("bins", "histograms have different bin counts");
  }
  if (p.empty()) throw EvaluationError("histograms are empty");
  double inter = 0.0;
  double uni = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += std::min(p[i], q[i]);
    uni += std::max(p[i], q[i]);
  }
  if (uni == 0.0) throw EvaluationError("both histograms are empty");
  return inter / uni;
}

double distribution_iou(std::span<const double> id_scores,
                        std::span<const double> ood_scores, std::size_t bins) {
  const ScoreHistograms h = score_histograms(id_scores, ood_scores, bins);
  auto normalized = [](const std::vector<std::size_t>& counts, std::size_t n) {
    std::vector<double> out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      out[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
    }
    return out;
  };
  return histogram_iou(normalized(h.id_counts, id_scores.size()),
                       normalized(h.ood_counts, ood_scores.size()));
}

}  // namespace oodscore
