#include "oodscore/synthetic.hpp"

#include <cmath>
#include <random>

#include "oodscore/detectors.hpp"
#include "oodscore/error.hpp"

namespace oodscore {
namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }
  std::size_t index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }

 private:
  std::mt19937_64 engine_;
};

void require(bool ok, const char* field, const char* message) {
  if (!ok) throw ValidationError(field, message);
}

}  // namespace

void SyntheticBenchSpec::validate() const {
  require(dim >= 20, "dim", "must be at least 20");
  require(n_classes >= 1, "n_classes", "must be at least 1");
  require(top_fraction > 0.0 && top_fraction <= 1.0, "top_fraction", "must lie in (0, 1]");
  require(id_top_mass > 0.0 && id_top_mass < 1.0, "id_top_mass", "must lie in (0, 1)");
  require(id_strength_min > 0.0 && id_strength_max >= id_strength_min,
          "id_strength_min", "need 0 < id_strength_min <= id_strength_max");
  require(id_background_mean > 0.0, "id_background_mean", "must be positive");
  require(ood_background_mean_min > 0.0 &&
              ood_background_mean_max >= ood_background_mean_min,
          "ood_background_mean_min",
          "need 0 < ood_background_mean_min <= ood_background_mean_max");
  require(ood_peak_max >= 0.0, "ood_peak_max", "must be non-negative");
  require(std::isfinite(signature_weight) && std::isfinite(background_weight) &&
              std::isfinite(bias),
          "signature_weight", "head parameters must be finite");
}

SyntheticBench generate_synthetic(const SyntheticBenchSpec& spec) {
  spec.validate();
  const std::size_t dim = spec.dim;
  const std::size_t width = top_count(dim, spec.top_fraction);
  auto sig = [&](std::size_t c, std::size_t j) { return (c * width + j) % dim; };

  std::vector<double> weights(spec.n_classes * dim, spec.background_weight);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    for (std::size_t j = 0; j < width; ++j) {
      weights[c * dim + sig(c, j)] = spec.signature_weight;
    }
  }
  std::vector<double> bias(spec.n_classes, spec.bias);

  Rng rng(spec.seed);
  std::vector<double> id(spec.n_id * dim);
  std::vector<bool> in_block(dim);
  for (std::size_t s = 0; s < spec.n_id; ++s) {
    double* row = id.data() + s * dim;
    const std::size_t c = rng.index(spec.n_classes);
    const double strength = rng.uniform(spec.id_strength_min, spec.id_strength_max);
    for (std::size_t j = 0; j < dim; ++j) row[j] = rng.exponential(spec.id_background_mean);
    std::fill(in_block.begin(), in_block.end(), false);
    double block_mass = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t at = sig(c, j);
      row[at] = strength * rng.uniform(0.5, 1.5);
      in_block[at] = true;
      block_mass += row[at];
    }
    double rest_mass = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      if (!in_block[j]) rest_mass += row[j];
    }
    const double tau = spec.id_top_mass;
    if (rest_mass > 0.0 && block_mass / (block_mass + rest_mass) < tau) {
      const double shrink = block_mass * (1.0 - tau) / (tau * rest_mass);
      for (std::size_t j = 0; j < dim; ++j) {
        if (!in_block[j]) row[j] *= shrink;
      }
    }
  }

  std::vector<double> ood(spec.n_ood * dim);
  for (std::size_t s = 0; s < spec.n_ood; ++s) {
    double* row = ood.data() + s * dim;
    const double mean =
        rng.uniform(spec.ood_background_mean_min, spec.ood_background_mean_max);
    for (std::size_t j = 0; j < dim; ++j) row[j] = rng.exponential(mean);
    const std::size_t c = rng.index(spec.n_classes);
    const double bump = rng.uniform(0.0, spec.ood_peak_max);
    for (std::size_t j = 0; j < width; ++j) {
      row[sig(c, j)] += bump * rng.uniform(0.5, 1.5);
    }
  }

  return {FeatureMatrix(spec.n_id, dim, std::move(id)),
          FeatureMatrix(spec.n_ood, dim, std::move(ood)),
          ClassifierHead(spec.n_classes, dim, std::move(weights), std::move(bias))};
}

double top_mass_share(std::span<const double> row, double fraction) {
  const auto top = top_k_indices(row, top_count(row.size(), fraction));
  double total = 0.0;
  for (double v : row) total += v;
  double picked = 0.0;
  for (std::size_t i : top) picked += row[i];
  return total == 0.0 ? 0.0 : picked / total;
}

}  // namespace oodscore
