#pragma once

// Seeded synthetic benchmark with a controlled activation-shape contrast.
//
// Each class c owns a contiguous block of ceil(top_fraction * dim)
// "signature" coordinates starting at c * width (wrapping mod dim). The head
// weights a class's signature block by `signature_weight`, every other
// coordinate by `background_weight`, and adds `bias`.
//
// ID rows: pick a class, draw a strength a ~ U[id_strength_min,
// id_strength_max], fill the row with Exp(id_background_mean) noise and set
// the signature block to a * U[0.5, 1.5]. If the signature block then holds
// less than `id_top_mass` of the row's mass, the background is shrunk until
// it holds exactly that share.
//
// OOD rows: draw a background mean mu ~ U[ood_background_mean_min,
// ood_background_mean_max], fill the row with Exp(mu) noise, then add a weak
// bump b * U[0.5, 1.5] (b ~ U[0, ood_peak_max]) on one random class block.
//
// Randomness comes from std::mt19937_64 with hand-written transforms, so the
// output is identical across standard library implementations.

#include <cstdint>

#include "oodscore/core.hpp"

namespace oodscore {

struct SyntheticBenchSpec {
  std::uint64_t seed = 7;
  std::size_t n_id = 2000;
  std::size_t n_ood = 2000;
  std::size_t dim = 256;
  std::size_t n_classes = 10;
  double top_fraction = 0.05;
  double id_top_mass = 0.6;
  double id_strength_min = 0.05;
  double id_strength_max = 1.5;
  double id_background_mean = 0.1;
  double ood_background_mean_min = 0.1;
  double ood_background_mean_max = 0.3;
  double ood_peak_max = 0.2;
  double signature_weight = 0.5;
  double background_weight = 0.0;
  double bias = -3.0;

  /// Throws ValidationError naming the field; dim must be at least 20.
  void validate() const;
};

struct SyntheticBench {
  FeatureMatrix id;
  FeatureMatrix ood;
  ClassifierHead head;
};

SyntheticBench generate_synthetic(const SyntheticBenchSpec& spec);

/// Share of a row's total mass held by its ceil(fraction * n) largest entries.
double top_mass_share(std::span<const double> row, double fraction);

}  // namespace oodscore
