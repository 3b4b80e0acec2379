#pragma once

// Post-hoc OOD detectors operating on penultimate activations and the final
// linear layer. Every detector returns scores oriented so that higher means
// more in-distribution; energy-based detectors therefore return -E.

#include <cstddef>
#include <span>
#include <vector>

#include "oodscore/core.hpp"

namespace oodscore {

Logits compute_logits(const FeatureMatrix& features, const ClassifierHead& head);

/// Logits of a single activation vector. Throws ValidationError("dim") on a
/// shape mismatch.
std::vector<double> logits_for(std::span<const double> h,
                               const ClassifierHead& head);

/// Number of activations treated as "top": max(1, ceil(p * n)).
std::size_t top_count(std::size_t n, double p);

/// Indices of the k largest entries, largest first. Equal values are ordered
/// by lower index first, so the selected set is unique.
std::vector<std::size_t> top_k_indices(std::span<const double> h,
                                       std::size_t k);

/// Per-sample logit scale S = (S1 / S2)^2 where S1 sums every activation and
/// S2 sums the top max(1, ceil(p*n)) of them.
struct ScaleFactor {
  double value = 1.0;
  double s1 = 0.0;
  double s2 = 0.0;
  std::size_t k = 1;
  /// S2 was zero, so value was forced to the neutral 1.
  bool fallback = false;
  /// S1 < 0; possible for raw transformer features without ReLU.
  bool s1_negative = false;
};

/// With `relu_preprocess`, negative activations are zeroed before the sums.
/// This only affects S; callers still compute logits from the original h.
ScaleFactor lts_scale_factor(std::span<const double> h, double p,
                             bool relu_preprocess = false);

/// log(sum(exp(z))) with the max-shift.
double logsumexp(std::span<const double> z);

/// E(z) = -logsumexp(z). Lower for confident in-distribution predictions.
double energy_score(std::span<const double> logits);

/// Maximum softmax probability, in (0, 1].
double msp_score(std::span<const double> logits);

/// Elementwise min(h, threshold). Throws ValidationError("react_threshold")
/// unless threshold > 0.
std::vector<double> react_clip(std::span<const double> h, double threshold);

/// Clip value taken as the `percentile` (0..100, linear interpolation between
/// order statistics) of every activation in `calibration`.
double react_threshold_from_percentile(const FeatureMatrix& calibration,
                                       double percentile);

// Activation-shaping baselines (ASH). Formulas follow the original ASH work;
// all three zero everything outside the top-k.

/// Keep the top-k entries unchanged.
std::vector<double> ash_p(std::span<const double> h, double p);
/// Replace each top-k entry with sum(h) / k.
std::vector<double> ash_b(std::span<const double> h, double p);
/// Multiply each top-k entry by exp(S1 / S2); factor 1 when S2 == 0.
std::vector<double> ash_s(std::span<const double> h, double p);

/// SCALE: multiply every entry by exp(S1 / S2) without pruning; factor 1 when
/// S2 == 0.
std::vector<double> scale_features(std::span<const double> h, double p);

/// Intermediate values of the ReAct+LTS pipeline for one sample.
struct ReactLtsTrace {
  ScaleFactor scale;            // from the raw, unclipped activations
  std::vector<double> clipped;  // react_clip(h, c)
  std::vector<double> logits;   // head applied to `clipped`
  double score = 0.0;           // logsumexp(S * logits)
};

ReactLtsTrace react_lts_trace(std::span<const double> h,
                              const ClassifierHead& head,
                              const DetectorSpec& spec);

/// Score of a single activation vector under `spec`.
double score_sample(std::span<const double> h, const ClassifierHead& head,
                    const DetectorSpec& spec);

/// -energy of S-scaled logits, where S comes from lts_scale_factor.
std::vector<double> lts_energy(const FeatureMatrix& features,
                               const ClassifierHead& head,
                               const DetectorSpec& spec);

/// S from raw h, then ReAct clipping, then -energy of S-scaled logits.
std::vector<double> react_lts(const FeatureMatrix& features,
                              const ClassifierHead& head,
                              const DetectorSpec& spec);

/// Scores every row of `features`. Rows are independent; `jobs` > 1 splits
/// them across threads with bitwise-identical results.
std::vector<double> run_detector(const FeatureMatrix& features,
                                 const ClassifierHead& head,
                                 const DetectorSpec& spec, unsigned jobs = 1);

}  // namespace oodscore
