#include "oodscore/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "oodscore/error.hpp"
#include "parallel.hpp"

namespace oodscore {
namespace {

// Neumaier-compensated sum in index order.
double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

void check_top_fraction(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ValidationError("p", "must lie in (0, 1], got " + std::to_string(p));
  }
}

void check_nonempty(std::span<const double> h) {
  if (h.empty()) throw ValidationError("h", "activation vector is empty");
}

struct TopSums {
  std::vector<std::size_t> top;  // largest first
  double s1 = 0.0;
  double s2 = 0.0;
};

TopSums top_sums(std::span<const double> h, double p) {
  check_top_fraction(p);
  check_nonempty(h);
  TopSums out;
  out.top = top_k_indices(h, top_count(h.size(), p));
  out.s1 = compensated_sum(h);
  if (out.top.size() == h.size()) {
    out.s2 = out.s1;
  } else {
    std::vector<double> picked;
    picked.reserve(out.top.size());
    for (std::size_t i : out.top) picked.push_back(h[i]);
    out.s2 = compensated_sum(picked);
  }
  return out;
}

double exp_ratio_factor(const TopSums& sums) {
  return sums.s2 == 0.0 ? 1.0 : std::exp(sums.s1 / sums.s2);
}

std::vector<double> scaled(std::span<const double> z, double factor) {
  std::vector<double> out(z.begin(), z.end());
  for (double& v : out) v *= factor;
  return out;
}

double negative_energy(std::span<const double> logits) {
  return logsumexp(logits);
}

std::vector<double> relu_copy(std::span<const double> h) {
  std::vector<double> out(h.begin(), h.end());
  for (double& v : out) v = std::max(v, 0.0);
  return out;
}

}  // namespace

std::vector<double> logits_for(std::span<const double> h,
                               const ClassifierHead& head) {
  if (h.size() != head.dim()) {
    throw ValidationError("dim", "feature dim " + std::to_string(h.size()) +
                                     " does not match head dim " +
                                     std::to_string(head.dim()));
  }
  std::vector<double> out(head.n_classes());
  for (std::size_t c = 0; c < head.n_classes(); ++c) {
    const auto w = head.weight_row(c);
    double acc = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) acc += w[j] * h[j];
    out[c] = acc + head.bias()[c];
  }
  return out;
}

Logits compute_logits(const FeatureMatrix& features,
                      const ClassifierHead& head) {
  if (features.dim() != head.dim()) {
    throw ValidationError("dim", "feature dim " +
                                     std::to_string(features.dim()) +
                                     " does not match head dim " +
                                     std::to_string(head.dim()));
  }
  std::vector<double> values;
  values.reserve(features.n_samples() * head.n_classes());
  for (std::size_t s = 0; s < features.n_samples(); ++s) {
    const auto row = logits_for(features.row(s), head);
    values.insert(values.end(), row.begin(), row.end());
  }
  return Logits(features.n_samples(), head.n_classes(), std::move(values));
}

std::size_t top_count(std::size_t n, double p) {
  check_top_fraction(p);
  // p * n products such as 0.07 * 100 = 7.000000000000001 are snapped to the
  // nearest integer before taking the ceiling.
  const double product = p * static_cast<double>(n);
  const double nearest = std::round(product);
  const double raw = std::abs(product - nearest) <= 1e-9 * std::max(1.0, product)
                         ? nearest
                         : std::ceil(product);
  const auto k = static_cast<std::size_t>(raw);
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

std::vector<std::size_t> top_k_indices(std::span<const double> h,
                                       std::size_t k) {
  k = std::min(k, h.size());
  std::vector<std::size_t> idx(h.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k),
                    idx.end(), [&](std::size_t a, std::size_t b) {
                      if (h[a] != h[b]) return h[a] > h[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

ScaleFactor lts_scale_factor(std::span<const double> h, double p,
                             bool relu_preprocess) {
  check_top_fraction(p);
  check_nonempty(h);
  std::vector<double> rectified;
  if (relu_preprocess) {
    rectified = relu_copy(h);
    h = rectified;
  }
  const TopSums sums = top_sums(h, p);
  ScaleFactor out;
  out.s1 = sums.s1;
  out.s2 = sums.s2;
  out.k = sums.top.size();
  out.s1_negative = sums.s1 < 0.0;
  if (sums.s2 == 0.0) {
    out.fallback = true;
    out.value = 1.0;
  } else {
    const double ratio = sums.s1 / sums.s2;
    out.value = ratio * ratio;
  }
  return out;
}

double logsumexp(std::span<const double> z) {
  if (z.empty()) throw ValidationError("logits", "need at least one class");
  const double peak = *std::max_element(z.begin(), z.end());
  if (std::isinf(peak)) return peak;
  double acc = 0.0;
  for (double v : z) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

double energy_score(std::span<const double> logits) {
  return -logsumexp(logits);
}

double msp_score(std::span<const double> logits) {
  if (logits.empty()) throw ValidationError("logits", "need at least one class");
  const double peak = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double v : logits) acc += std::exp(v - peak);
  return 1.0 / acc;
}

std::vector<double> react_clip(std::span<const double> h, double threshold) {
  if (!(threshold > 0.0)) {
    throw ValidationError("react_threshold", "must be positive");
  }
  std::vector<double> out(h.begin(), h.end());
  for (double& v : out) v = std::min(v, threshold);
  return out;
}

double react_threshold_from_percentile(const FeatureMatrix& calibration,
                                       double percentile) {
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw ValidationError("react_percentile", "must lie in [0, 100]");
  }
  std::vector<double> values = calibration.data();
  if (values.empty()) {
    throw ValidationError("react_calibration", "calibration set is empty");
  }
  std::sort(values.begin(), values.end());
  const double pos =
      percentile / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  const double c = values[lo] + frac * (values[hi] - values[lo]);
  if (!(c > 0.0)) {
    throw ValidationError("react_threshold",
                          "calibration percentile is not positive");
  }
  return c;
}

std::vector<double> ash_p(std::span<const double> h, double p) {
  const TopSums sums = top_sums(h, p);
  std::vector<double> out(h.size(), 0.0);
  for (std::size_t i : sums.top) out[i] = h[i];
  return out;
}

std::vector<double> ash_b(std::span<const double> h, double p) {
  const TopSums sums = top_sums(h, p);
  const double fill = sums.s1 / static_cast<double>(sums.top.size());
  std::vector<double> out(h.size(), 0.0);
  for (std::size_t i : sums.top) out[i] = fill;
  return out;
}

std::vector<double> ash_s(std::span<const double> h, double p) {
  const TopSums sums = top_sums(h, p);
  const double factor = exp_ratio_factor(sums);
  std::vector<double> out(h.size(), 0.0);
  for (std::size_t i : sums.top) out[i] = h[i] * factor;
  return out;
}

std::vector<double> scale_features(std::span<const double> h, double p) {
  return scaled(h, exp_ratio_factor(top_sums(h, p)));
}

ReactLtsTrace react_lts_trace(std::span<const double> h,
                              const ClassifierHead& head,
                              const DetectorSpec& spec) {
  spec.validate();
  ReactLtsTrace trace;
  trace.scale = lts_scale_factor(h, spec.p, spec.relu_preprocess);
  trace.clipped = react_clip(h, spec.react_threshold);
  trace.logits = logits_for(trace.clipped, head);
  trace.score = negative_energy(scaled(trace.logits, trace.scale.value));
  return trace;
}

double score_sample(std::span<const double> h, const ClassifierHead& head,
                    const DetectorSpec& spec) {
  switch (spec.kind) {
    case DetectorKind::kMsp:
      return msp_score(logits_for(h, head));
    case DetectorKind::kEnergy:
      return negative_energy(logits_for(h, head));
    case DetectorKind::kLts: {
      const ScaleFactor s = lts_scale_factor(h, spec.p, spec.relu_preprocess);
      return negative_energy(scaled(logits_for(h, head), s.value));
    }
    case DetectorKind::kReact:
      return negative_energy(
          logits_for(react_clip(h, spec.react_threshold), head));
    case DetectorKind::kReactLts:
      return react_lts_trace(h, head, spec).score;
    case DetectorKind::kAshP:
      return negative_energy(logits_for(ash_p(h, spec.p), head));
    case DetectorKind::kAshB:
      return negative_energy(logits_for(ash_b(h, spec.p), head));
    case DetectorKind::kAshS:
      return negative_energy(logits_for(ash_s(h, spec.p), head));
    case DetectorKind::kScale:
      return negative_energy(logits_for(scale_features(h, spec.p), head));
  }
  throw ValidationError("kind", "unhandled detector");
}

std::vector<double> run_detector(const FeatureMatrix& features,
                                 const ClassifierHead& head,
                                 const DetectorSpec& spec, unsigned jobs) {
  spec.validate();
  if (features.dim() != head.dim()) {
    throw ValidationError("dim", "feature dim " +
                                     std::to_string(features.dim()) +
                                     " does not match head dim " +
                                     std::to_string(head.dim()));
  }
  std::vector<double> scores(features.n_samples());
  detail::parallel_for(features.n_samples(), jobs, [&](std::size_t i) {
    scores[i] = score_sample(features.row(i), head, spec);
  });
  return scores;
}

std::vector<double> lts_energy(const FeatureMatrix& features,
                               const ClassifierHead& head,
                               const DetectorSpec& spec) {
  if (spec.kind != DetectorKind::kLts) {
    throw ValidationError("kind", "lts_energy requires kind lts");
  }
  return run_detector(features, head, spec);
}

std::vector<double> react_lts(const FeatureMatrix& features,
                              const ClassifierHead& head,
                              const DetectorSpec& spec) {
  if (spec.kind != DetectorKind::kReactLts) {
    throw ValidationError("kind", "react_lts requires kind react_lts");
  }
  return run_detector(features, head, spec);
}

}  // namespace oodscore
