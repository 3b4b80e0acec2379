#pragma once

// Threshold-free OOD evaluation metrics. In-distribution samples are the
// positive class and higher scores mean "more in-distribution".
//
// Conventions:
//  - AUROC counts tied (ID, OOD) pairs as one half (Mann-Whitney U).
//  - FPR@TPR uses the finite-sample step function: the threshold is the
//    largest ID score reaching the target TPR, with no interpolation.
//  - AUPR is average precision with ID positive ("AUPR-In"), processing tied
//    scores as one block.

#include <cstddef>
#include <span>
#include <vector>

#include "oodscore/core.hpp"

namespace oodscore {

inline constexpr double kDefaultTargetTpr = 0.95;
inline constexpr std::size_t kDefaultHistogramBins = 50;

double auroc(const ScoredDataset& scored);
double auroc(std::span<const double> id_scores,
             std::span<const double> ood_scores);

double fpr_at_tpr(const ScoredDataset& scored,
                  double target_tpr = kDefaultTargetTpr);
double fpr_at_tpr(std::span<const double> id_scores,
                  std::span<const double> ood_scores,
                  double target_tpr = kDefaultTargetTpr);

double aupr(const ScoredDataset& scored);
double aupr(std::span<const double> id_scores,
            std::span<const double> ood_scores);

MetricTriple evaluate(std::span<const double> id_scores,
                      std::span<const double> ood_scores,
                      double target_tpr = kDefaultTargetTpr);

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

/// One point per distinct score, visited from the highest threshold down, led
/// by (fpr, tpr) = (0, 0) at threshold +inf. The last point is always (1, 1).
std::vector<RocPoint> roc_curve(const ScoredDataset& scored);

/// Area under the emitted ROC polyline (trapezoid rule).
double trapezoid_area(std::span<const RocPoint> curve);

struct ScoreHistograms {
  std::vector<double> edges;  // bins + 1 edges over the pooled score range
  std::vector<std::size_t> id_counts;
  std::vector<std::size_t> ood_counts;
};

/// ID and OOD histograms over one shared set of equal-width bins spanning
/// min..max of the pooled scores. A degenerate range is widened by +-0.5.
ScoreHistograms score_histograms(std::span<const double> id_scores,
                                 std::span<const double> ood_scores,
                                 std::size_t bins = kDefaultHistogramBins);
ScoreHistograms score_histograms(const ScoredDataset& scored,
                                 std::size_t bins = kDefaultHistogramBins);

/// sum(min(p_i, q_i)) / sum(max(p_i, q_i)) for two distributions over the
/// same bins.
double histogram_iou(std::span<const double> p, std::span<const double> q);

/// IoU of the normalized ID and OOD score histograms.
double distribution_iou(std::span<const double> id_scores,
                        std::span<const double> ood_scores,
                        std::size_t bins = kDefaultHistogramBins);

}  // namespace oodscore
