#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "oodscore/detectors.hpp"
#include "oodscore/error.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

using namespace oodscore;
using testing_support::Random;

namespace {

ClassifierHead identity_head(std::size_t n) {
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1.0;
  return ClassifierHead(n, n, std::move(w), std::vector<double>(n, 0.0));
}

ClassifierHead random_head(Random& rng, std::size_t classes, std::size_t dim) {
  return ClassifierHead(classes, dim, rng.vector(classes * dim, -1, 1),
                        rng.vector(classes, -0.5, 0.5));
}

FeatureMatrix random_features(Random& rng, std::size_t n, std::size_t dim,
                              double lo, double hi) {
  return FeatureMatrix(n, dim, rng.vector(n * dim, lo, hi));
}

std::size_t argmax(std::span<const double> z) {
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

}  // namespace

TEST_CASE("compute_logits is the affine map") {
  const FeatureMatrix f(1, 2, {1, 0});
  const ClassifierHead h(2, 2, {2, 0, 0, 3}, {0, 0});
  CHECK(compute_logits(f, h).values() == std::vector<double>{2, 0});

  const ClassifierHead zero(3, 2, std::vector<double>(6, 0.0), {0.5, -1, 2});
  const FeatureMatrix any(2, 2, {7, -3, 0.25, 9});
  CHECK(compute_logits(any, zero).values() == std::vector<double>{0.5, -1, 2, 0.5, -1, 2});

  const FeatureMatrix one(1, 2, {1, 2});
  const ClassifierHead sum(1, 2, {1, 1}, {0.5});
  CHECK(compute_logits(one, sum).values()[0] == 3.5);

  try {
    compute_logits(FeatureMatrix(1, 3, {1, 2, 3}), sum);
    FAIL("expected a dimension error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "dim");
    CHECK(std::string(e.what()).find('3') != std::string::npos);
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
}

TEST_CASE("top_count rounds up and snaps representation error") {
  CHECK(top_count(4, 0.25) == 1);
  CHECK(top_count(100, 0.07) == 7);
  CHECK(top_count(100, 0.071) == 8);
  CHECK(top_count(2048, 0.05) == 103);
  CHECK(top_count(10, 1e-9) == 1);
  CHECK(top_count(10, 1.0) == 10);
  CHECK_THROWS_AS(top_count(10, 0.0), ValidationError);
}

TEST_CASE("top_k_indices breaks ties by lower index") {
  const std::vector<double> h{1, 2, 2, 1};
  CHECK(top_k_indices(h, 2) == std::vector<std::size_t>{1, 2});
  CHECK(top_k_indices(h, 3) == std::vector<std::size_t>{1, 2, 0});
  CHECK(top_k_indices(h, 10).size() == 4);
}

TEST_CASE("lts_scale_factor examples") {
  SUBCASE("uniform vector") {
    const auto s = lts_scale_factor(std::vector<double>{1, 1, 1, 1}, 0.25);
    CHECK(s.k == 1);
    CHECK(s.s1 == 4);
    CHECK(s.s2 == 1);
    CHECK(s.value == 16);
  }
  SUBCASE("whole vector is the identity") {
    const auto s = lts_scale_factor(std::vector<double>{0.3, -2, 5, 1e-3}, 1.0);
    CHECK(s.s1 == s.s2);
    CHECK(s.value == 1.0);
  }
  SUBCASE("reference evaluation") {
    const std::vector<double> h{3, 1, 0, 0};
    const auto ref = oracle::scale_factor(h, 0.25, false);
    const auto s = lts_scale_factor(h, 0.25);
    CHECK(s.k == 1);
    CHECK(s.value == doctest::Approx(static_cast<double>(ref.value)).epsilon(1e-15));
    CHECK(s.value == doctest::Approx(16.0 / 9.0).epsilon(1e-15));
  }
  SUBCASE("all-zero input falls back to 1") {
    const auto s = lts_scale_factor(std::vector<double>{0, 0, 0}, 0.5, true);
    CHECK(s.s2 == 0);
    CHECK(s.fallback);
    CHECK(s.value == 1.0);
  }
  SUBCASE("relu only changes the sums") {
    const std::vector<double> h{-4, 2, 1, 1};
    const auto raw = lts_scale_factor(h, 0.25, false);
    const auto rect = lts_scale_factor(h, 0.25, true);
    CHECK(raw.s1 == 0);
    CHECK(rect.s1 == 4);
    CHECK(rect.value == 4);
  }
  SUBCASE("negative sum is recorded and squared away") {
    const auto s = lts_scale_factor(std::vector<double>{-3, -1, 1, -1}, 0.25);
    CHECK(s.s1_negative);
    CHECK(s.value == 16);
  }
  SUBCASE("parameter errors") {
    CHECK_THROWS_AS(lts_scale_factor(std::vector<double>{1}, 0.0), ValidationError);
    CHECK_THROWS_AS(lts_scale_factor(std::vector<double>{1}, 1.01), ValidationError);
    CHECK_THROWS_AS(lts_scale_factor(std::vector<double>{}, 0.5), ValidationError);
  }
}

TEST_CASE("lts_scale_factor agrees with the brute-force reference") {
  Random rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng.between(1, 600);
    const bool mixed = rng.coin();
    auto h = rng.vector(n, mixed ? -1.0 : 0.0, 2.0);
    if (rng.coin(0.2)) {  // inject ties
      for (std::size_t i = 0; i < n; i += 3) h[i] = 0.5;
    }
    const double p = rng.uniform(0.001, 1.0);
    const bool relu = rng.coin();
    const auto ref = oracle::scale_factor(h, p, relu);
    const auto s = lts_scale_factor(h, p, relu);
    REQUIRE(s.k == ref.k);
    REQUIRE(s.fallback == ref.fallback);
    CHECK(s.value == doctest::Approx(static_cast<double>(ref.value)).epsilon(1e-9));
  }
}

TEST_CASE("energy_score examples and overflow safety") {
  CHECK(energy_score(std::vector<double>(7, 0.0)) == doctest::Approx(-std::log(7.0)));
  CHECK(energy_score(std::vector<double>{-2.5}) == 2.5);
  const double ln2 = std::numbers::ln2;
  CHECK(energy_score(std::vector<double>{ln2, ln2}) ==
        doctest::Approx(-std::log(4.0)).epsilon(1e-15));
  CHECK(std::isfinite(energy_score(std::vector<double>{1e4, 1e4 - 1})));
  CHECK(energy_score(std::vector<double>{1e4, -1e4}) == doctest::Approx(-1e4));
}

TEST_CASE("msp_score examples") {
  CHECK(msp_score(std::vector<double>(5, 1.3)) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(msp_score(std::vector<double>{1000, 0}) == doctest::Approx(1.0));
  CHECK(msp_score(std::vector<double>{std::log(3.0), 0}) ==
        doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("react_clip") {
  CHECK(react_clip(std::vector<double>{1, 5}, 2) == std::vector<double>{1, 2});
  const std::vector<double> h{0.1, 3, -2};
  CHECK(react_clip(h, 3) == h);
  const auto once = react_clip(h, 1);
  CHECK(react_clip(once, 1) == once);
  CHECK_THROWS_AS(react_clip(h, 0.0), ValidationError);
  CHECK_THROWS_AS(react_clip(h, -1.0), ValidationError);
}

TEST_CASE("react threshold from a calibration percentile") {
  const FeatureMatrix calib(1, 5, {5, 1, 4, 2, 3});
  CHECK(react_threshold_from_percentile(calib, 50) == 3);
  CHECK(react_threshold_from_percentile(calib, 90) == doctest::Approx(4.6));
  CHECK(react_threshold_from_percentile(calib, 100) == 5);
  CHECK_THROWS_AS(react_threshold_from_percentile(FeatureMatrix(1, 2, {-1, 0}), 50),
                  ValidationError);
  CHECK_THROWS_AS(react_threshold_from_percentile(calib, 101), ValidationError);
}

TEST_CASE("ASH variants") {
  const std::vector<double> h{3, 1, 0, 0};
  CHECK(ash_p(std::vector<double>{0.2, 1, -3}, 1.0) == std::vector<double>{0.2, 1, -3});
  CHECK(ash_p(h, 0.25) == std::vector<double>{3, 0, 0, 0});
  CHECK(ash_b(h, 0.5) == std::vector<double>{2, 2, 0, 0});
  const auto s = ash_s(h, 0.25);
  CHECK(s[0] == doctest::Approx(3 * std::exp(4.0 / 3.0)).epsilon(1e-15));
  CHECK(s[1] == 0);
  CHECK(s[2] == 0);
  CHECK(s[3] == 0);
  CHECK(ash_s(std::vector<double>{0, 0}, 0.5) == std::vector<double>{0, 0});
}

TEST_CASE("SCALE multiplies every activation") {
  const std::vector<double> h{3, 1, 0, 0};
  const auto all = scale_features(h, 1.0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    CHECK(all[i] == doctest::Approx(h[i] * std::numbers::e).epsilon(1e-15));
  }
  const auto top = scale_features(h, 0.25);
  CHECK(top[0] / h[0] == doctest::Approx(std::exp(4.0 / 3.0)).epsilon(1e-15));
  CHECK(top[1] / h[1] == doctest::Approx(std::exp(4.0 / 3.0)).epsilon(1e-15));
  CHECK(scale_features(std::vector<double>{0, 0, 0}, 0.5) == std::vector<double>{0, 0, 0});
}

TEST_CASE("lts_energy examples") {
  Random rng(3);
  const auto head = random_head(rng, 5, 8);
  const auto features = random_features(rng, 20, 8, 0, 2);

  SUBCASE("p = 1 reproduces energy") {
    const auto lts = lts_energy(features, head, {DetectorKind::kLts, 1.0});
    const auto energy = run_detector(features, head, {DetectorKind::kEnergy});
    CHECK(lts == energy);
  }
  SUBCASE("uniform activations give S = 16 at p = 0.25") {
    const FeatureMatrix uniform(1, 4, {1, 1, 1, 1});
    const ClassifierHead h4(2, 4, {0.1, 0.2, 0.3, 0.4, -0.5, 0.1, 0, 0}, {0.2, -0.1});
    const auto z = logits_for(uniform.row(0), h4);
    const std::vector<double> scaled_z{16 * z[0], 16 * z[1]};
    const auto score = lts_energy(uniform, h4, {DetectorKind::kLts, 0.25});
    CHECK(score[0] == doctest::Approx(static_cast<double>(oracle::logsumexp(scaled_z)))
                          .epsilon(1e-14));
  }
  SUBCASE("all-zero activations fall back to energy on the bias") {
    const FeatureMatrix zeros(1, 8, std::vector<double>(8, 0.0));
    const auto score = lts_energy(zeros, head, {DetectorKind::kLts, 0.05});
    CHECK(score[0] == -energy_score(head.bias()));
  }
  SUBCASE("logits come from the original activations under relu") {
    const FeatureMatrix mixed(1, 2, {-1, 2});
    const ClassifierHead h2(2, 2, {1, 0, 0, 1}, {0, 0});
    DetectorSpec spec{DetectorKind::kLts, 0.5};
    spec.relu_preprocess = true;
    // ReLU'd copy [0, 2]: S = (2/2)^2 = 1, so the score is plain energy of
    // the raw logits [-1, 2].
    CHECK(lts_energy(mixed, h2, spec)[0] ==
          -energy_score(std::vector<double>{-1, 2}));
  }
  CHECK_THROWS_AS(lts_energy(features, head, {DetectorKind::kEnergy}), ValidationError);
}

TEST_CASE("react_lts examples") {
  const ClassifierHead id2 = identity_head(2);
  SUBCASE("documented fixture") {
    const FeatureMatrix f(1, 2, {3, 1});
    DetectorSpec spec{DetectorKind::kReactLts, 0.5, 2.0};
    const double s = 16.0 / 9.0;
    const double expected =
        static_cast<double>(oracle::logsumexp({s * 2, s * 1}));
    CHECK(react_lts(f, id2, spec)[0] == doctest::Approx(expected).epsilon(1e-15));
    const auto trace = react_lts_trace(f.row(0), id2, spec);
    CHECK(trace.scale.value == doctest::Approx(s).epsilon(1e-15));
    CHECK(trace.clipped == std::vector<double>{2, 1});
  }
  Random rng(5);
  const auto head = random_head(rng, 4, 6);
  const auto features = random_features(rng, 15, 6, 0, 3);
  SUBCASE("no-op clip equals LTS") {
    const auto rl = react_lts(features, head, {DetectorKind::kReactLts, 0.2, 3.0});
    const auto lts = lts_energy(features, head, {DetectorKind::kLts, 0.2});
    CHECK(rl == lts);
  }
  SUBCASE("p = 1 equals ReAct + energy") {
    const auto rl = react_lts(features, head, {DetectorKind::kReactLts, 1.0, 1.2});
    const auto react = run_detector(features, head, {DetectorKind::kReact, 1.0, 1.2});
    CHECK(rl == react);
  }
}

TEST_CASE("run_detector dispatch identities") {
  Random rng(8);
  const auto head = random_head(rng, 6, 10);
  const auto features = random_features(rng, 25, 10, 0, 1);

  const auto energy = run_detector(features, head, {DetectorKind::kEnergy});
  const Logits logits = compute_logits(features, head);
  for (std::size_t i = 0; i < features.n_samples(); ++i) {
    CHECK(energy[i] == -energy_score(logits.row(i)));
  }
  CHECK(run_detector(features, head, {DetectorKind::kLts, 1.0}) == energy);
  CHECK(run_detector(features, head, {DetectorKind::kAshP, 1.0}) == energy);

  const double c = *std::max_element(features.data().begin(), features.data().end());
  CHECK(run_detector(features, head, {DetectorKind::kReactLts, 0.1, c}) ==
        run_detector(features, head, {DetectorKind::kLts, 0.1}));

  const auto msp = run_detector(features, head, {DetectorKind::kMsp});
  for (double v : msp) {
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(run_detector(features, head, {DetectorKind::kLts, 0.0}),
                  ValidationError);
}

TEST_CASE("property: scale invariance of S") {
  Random rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto h = rng.vector(rng.between(1, 300), 0.0, 5.0);
    const double alpha = std::exp(rng.uniform(-8, 8));
    std::vector<double> scaled = h;
    for (double& v : scaled) v *= alpha;
    const double p = rng.uniform(0.01, 1.0);
    CHECK(lts_scale_factor(scaled, p).value ==
          doctest::Approx(lts_scale_factor(h, p).value).epsilon(1e-12));
  }
}

TEST_CASE("property: S >= 1 for non-negative input, equality iff the tail is zero") {
  Random rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng.between(2, 100);
    auto h = rng.vector(n, 0.0, 1.0);
    const double p = rng.uniform(0.01, 0.9);
    const std::size_t k = top_count(n, p);
    if (rng.coin(0.3) && k < n) {
      for (std::size_t i : top_k_indices(h, n)) h[i] = 0.0;  // all zero
      for (std::size_t i = 0; i < k; ++i) h[i] = 1.0 + static_cast<double>(i);
    }
    const auto s = lts_scale_factor(h, p);
    if (s.fallback) continue;
    CHECK(s.value >= 1.0);
    std::vector<bool> in_top(n, false);
    for (std::size_t i : top_k_indices(h, k)) in_top[i] = true;
    double tail = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_top[i]) tail += h[i];
    }
    CHECK((s.value == 1.0) == (tail == 0.0));
  }
}

TEST_CASE("property: argmax invariance of scaled logits") {
  Random rng(23);
  const auto head = random_head(rng, 10, 32);
  const auto features = random_features(rng, 500, 32, -0.5, 2.0);
  for (std::size_t i = 0; i < features.n_samples(); ++i) {
    const auto z = logits_for(features.row(i), head);
    const auto s = lts_scale_factor(features.row(i), 0.05);
    if (!(s.value > 0)) continue;
    std::vector<double> sz = z;
    for (double& v : sz) v *= s.value;
    CHECK(argmax(sz) == argmax(z));
  }
}

TEST_CASE("property: energy shift identity") {
  Random rng(24);
  for (int trial = 0; trial < 200; ++trial) {
    auto z = rng.vector(rng.between(1, 50), -30, 30);
    const double c = rng.uniform(-50, 50);
    const double before = energy_score(z);
    for (double& v : z) v += c;
    CHECK(std::abs(energy_score(z) - (before - c)) < 1e-9);
  }
}

TEST_CASE("property: scores are identical across job counts") {
  Random rng(25);
  const auto head = random_head(rng, 7, 40);
  const auto features = random_features(rng, 300, 40, 0, 1);
  for (auto kind : {DetectorKind::kLts, DetectorKind::kScale, DetectorKind::kAshB}) {
    const DetectorSpec spec{kind, 0.1};
    const auto serial = run_detector(features, head, spec, 1);
    CHECK(run_detector(features, head, spec, 8) == serial);
    CHECK(run_detector(features, head, spec, 3) == serial);
  }
}
