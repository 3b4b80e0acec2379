#include <fstream>

#include "doctest.h"
#include "oodscore/detectors.hpp"
#include "oodscore/error.hpp"
#include "oodscore/harness.hpp"
#include "oodscore/metrics.hpp"
#include "oodscore/report.hpp"
#include "oodscore/synthetic.hpp"
#include "support/bench.hpp"
#include "support/random.hpp"
#include "support/tempdir.hpp"

using namespace oodscore;
using testing_support::detector;
using testing_support::make_bench;
using testing_support::Random;
using testing_support::TempDir;

namespace {

Benchmark random_bench(std::uint64_t seed, std::size_t n_ood_sets) {
  Random rng(seed);
  const std::size_t dim = 24;
  ClassifierHead head(5, dim, rng.vector(5 * dim, -1, 1), rng.vector(5, -0.3, 0.3));
  FeatureMatrix id(60, dim, rng.vector(60 * dim, 0, 2));
  std::vector<NamedFeatures> ood;
  for (std::size_t t = 0; t < n_ood_sets; ++t) {
    const std::size_t n = 40 + 10 * t;
    ood.push_back({"ood" + std::to_string(t), FeatureMatrix(n, dim, rng.vector(n * dim, 0, 1.5))});
  }
  return make_bench(std::move(id), std::move(ood), std::move(head),
                    {detector(DetectorKind::kEnergy), detector(DetectorKind::kLts, 1.0),
                     detector(DetectorKind::kLts, 0.1), detector(DetectorKind::kMsp),
                     detector(DetectorKind::kReactLts, 0.1, 1.2)});
}

}  // namespace

TEST_CASE("report rows are detector-major with an Average per detector") {
  const auto bench = random_bench(51, 3);
  const auto run = run_benchmark(bench, 2);
  const auto& rows = run.report.rows();
  REQUIRE(rows.size() == bench.detectors.size() * 4);
  for (std::size_t d = 0; d < bench.detectors.size(); ++d) {
    const auto* avg = run.report.find(bench.detectors[d].label, kAverageTask);
    REQUIRE(avg != nullptr);
    CHECK(rows[d * 4 + 3] == *avg);
    double sum = 0;
    std::size_t n_ood = 0;
    for (std::size_t t = 0; t < 3; ++t) {
      const auto& row = rows[d * 4 + t];
      CHECK(row.ood_dataset == bench.ood[t].name);
      sum += row.metrics.auroc;
      n_ood += row.n_ood;
    }
    CHECK(avg->metrics.auroc == doctest::Approx(sum / 3).epsilon(1e-15));
    CHECK(avg->n_ood == n_ood);
  }
}

TEST_CASE("energy and whole-vector LTS rows are identical") {
  const auto bench = random_bench(52, 2);
  const auto run = run_benchmark(bench, 1);
  for (const auto& task : {"ood0", "ood1", "Average"}) {
    CHECK(run.report.find("energy", task)->metrics ==
          run.report.find("lts[p=1]", task)->metrics);
  }
}

TEST_CASE("task scores match direct detector calls and metrics") {
  const auto bench = random_bench(53, 2);
  const auto run = run_benchmark(bench, 3);
  for (const auto& task : run.tasks) {
    const ResolvedDetector* det = nullptr;
    for (const auto& d : bench.detectors) {
      if (d.label == task.detector) det = &d;
    }
    REQUIRE(det != nullptr);
    CHECK(task.id_scores == run_detector(bench.id.features, bench.head, det->spec));
    const auto* row = run.report.find(task.detector, task.ood_dataset);
    REQUIRE(row != nullptr);
    CHECK(row->metrics.auroc == auroc(task.id_scores, task.ood_scores));
    CHECK(row->metrics.fpr_at_95 == fpr_at_tpr(task.id_scores, task.ood_scores, 0.95));
    CHECK(row->metrics.aupr == aupr(task.id_scores, task.ood_scores));
  }
}

TEST_CASE("perfectly separated fixture separates under every detector") {
  // Identity head with a negative bias. ID rows put all mass on one class
  // coordinate; OOD rows are small and flat, so every detector ranks them
  // below every ID row.
  std::vector<double> w(16, 0.0);
  for (std::size_t i = 0; i < 4; ++i) w[i * 4 + i] = 1.0;
  ClassifierHead head(4, 4, w, {-1, -1, -1, -1});
  FeatureMatrix id(4, 4, {10, 0, 0, 0, 0, 8, 0, 0, 0, 0, 12, 0, 0, 0, 0, 9});
  std::vector<NamedFeatures> ood;
  ood.push_back({"flat", FeatureMatrix(2, 4, {0.1, 0.1, 0.1, 0.1, 0.2, 0.1, 0.15, 0.1})});
  std::vector<ResolvedDetector> detectors{
      detector(DetectorKind::kMsp),          detector(DetectorKind::kEnergy),
      detector(DetectorKind::kLts, 0.25),    detector(DetectorKind::kReact, 0.25, 1.0),
      detector(DetectorKind::kReactLts, 0.25, 1.0), detector(DetectorKind::kAshP, 0.25),
      detector(DetectorKind::kAshB, 0.25),   detector(DetectorKind::kAshS, 0.25),
      detector(DetectorKind::kScale, 0.25)};
  const auto bench = make_bench(std::move(id), std::move(ood), std::move(head), detectors);
  const auto report = run_benchmark(bench).report;
  for (const auto& d : detectors) {
    CAPTURE(d.label);
    const auto* row = report.find(d.label, "flat");
    REQUIRE(row != nullptr);
    CHECK(row->metrics.auroc == 1.0);
    CHECK(row->metrics.fpr_at_95 == 0.0);
    CHECK(row->metrics.aupr == 1.0);
  }
}

TEST_CASE("benchmark validation") {
  auto bench = random_bench(54, 1);
  bench.detectors.push_back(detector(DetectorKind::kEnergy));
  CHECK_THROWS_AS(run_benchmark(bench), ValidationError);

  auto wrong_dim = random_bench(54, 1);
  wrong_dim.ood[0].features = FeatureMatrix(1, 3, {1, 2, 3});
  CHECK_THROWS_AS(run_benchmark(wrong_dim), ValidationError);
}

TEST_CASE("results do not depend on the job count") {
  const auto bench = random_bench(55, 3);
  const auto serial = run_benchmark(bench, 1);
  for (unsigned jobs : {2u, 8u, 64u}) {
    const auto parallel = run_benchmark(bench, jobs);
    CHECK(parallel.report.rows() == serial.report.rows());
    CHECK(report_to_json(parallel.report).dump() == report_to_json(serial.report).dump());
  }
  CHECK(sweep_p(bench, {0.05, 0.5}, 8) == sweep_p(bench, {0.05, 0.5}, 1));
  CHECK(morph_iou(bench, {0.05, 0.5}, 20, 8) == morph_iou(bench, {0.05, 0.5}, 20, 1));
}

TEST_CASE("sweep_p anchors at p = 1") {
  const auto bench = random_bench(56, 2);
  const auto sweep = sweep_p(bench, {0.05, 0.2}, 2);
  CHECK(sweep.grid == std::vector<double>{0.05, 0.2, 1.0});
  // Two tasks plus Average at each grid value.
  CHECK(sweep.records.size() == 9);
  const auto run = run_benchmark(bench);
  for (const auto& rec : sweep.records) {
    if (rec.p != 1.0) continue;
    CHECK(rec.metrics == run.report.find("energy", rec.ood_dataset)->metrics);
  }
  REQUIRE(sweep.best.size() == 3);
  CHECK(sweep.best.back().ood_dataset == kAverageTask);
  for (const auto& best : sweep.best) {
    for (const auto& rec : sweep.records) {
      if (rec.ood_dataset != best.ood_dataset) continue;
      CHECK(rec.metrics.auroc <= best.best_auroc);
      CHECK(rec.metrics.fpr_at_95 >= best.best_fpr);
    }
  }
  CHECK_THROWS_AS(sweep_p(bench, {0.5, 0.1}), ValidationError);
}

TEST_CASE("morph_iou") {
  const auto bench = random_bench(57, 2);
  const auto curve = morph_iou(bench, {0.1, 1.0}, 30, 1);
  REQUIRE(curve.size() == 6);
  CHECK_FALSE(curve[0].p.has_value());
  const auto energy_id = run_detector(bench.id.features, bench.head, {DetectorKind::kEnergy});
  const auto energy_ood = run_detector(bench.ood[0].features, bench.head, {DetectorKind::kEnergy});
  CHECK(curve[0].iou == distribution_iou(energy_id, energy_ood, 30));
  for (const auto& pt : curve) {
    CHECK(pt.iou >= 0.0);
    CHECK(pt.iou <= 1.0);
  }

  // Same features on both sides overlap fully; far-apart ones not at all.
  ClassifierHead head(1, 1, {1}, {0});
  std::vector<NamedFeatures> same;
  same.push_back({"same", FeatureMatrix(3, 1, {1, 2, 3})});
  same.push_back({"far", FeatureMatrix(2, 1, {100, 101})});
  const auto toy = make_bench(FeatureMatrix(3, 1, {1, 2, 3}), std::move(same), head,
                              {detector(DetectorKind::kEnergy)});
  const auto toy_curve = morph_iou(toy, {1.0}, 10, 1);
  CHECK(toy_curve[0].iou == 1.0);
  CHECK(toy_curve[1].iou == 0.0);
}

TEST_CASE("synthetic generator is deterministic and shaped as documented") {
  SyntheticBenchSpec spec;
  spec.n_id = 300;
  spec.n_ood = 300;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.id.data() == b.id.data());
  CHECK(a.ood.data() == b.ood.data());
  CHECK(a.head.weights() == b.head.weights());
  spec.seed = 8;
  CHECK(generate_synthetic(spec).id.data() != a.id.data());

  double id_share = 0, ood_share = 0;
  for (std::size_t i = 0; i < a.id.n_samples(); ++i) {
    const double s = top_mass_share(a.id.row(i), spec.top_fraction);
    CHECK(s >= spec.id_top_mass - 1e-12);
    id_share += s;
  }
  for (std::size_t i = 0; i < a.ood.n_samples(); ++i) {
    ood_share += top_mass_share(a.ood.row(i), spec.top_fraction);
  }
  id_share /= static_cast<double>(a.id.n_samples());
  ood_share /= static_cast<double>(a.ood.n_samples());
  CHECK(id_share - ood_share > 0.3);

  SyntheticBenchSpec bad;
  bad.dim = 10;
  CHECK_THROWS_AS(generate_synthetic(bad), ValidationError);
}

TEST_CASE("golden snapshot of the default synthetic benchmark") {
  const std::string path = std::string(OODSCORE_GOLDEN_DIR) + "/synthetic_seed7.json";
  const auto snapshot = testing_support::synthetic_snapshot();
  CHECK(snapshot["iou_at_best_auroc_p"].get<double>() < snapshot["iou"]["energy"].get<double>());
  CHECK(snapshot["metrics"]["lts[p=0.05]"]["auroc"].get<double>() >
        snapshot["metrics"]["energy"]["auroc"].get<double>());
  if (testing_support::update_golden_requested()) {
    std::ofstream(path) << snapshot.dump(2) << "\n";
    MESSAGE("rewrote " << path);
  }
  const auto golden = testing_support::load_json(path);
  REQUIRE_MESSAGE(golden.is_object(), "missing golden file " << path);
  std::string where;
  CHECK_MESSAGE(testing_support::json_close(snapshot, golden, 1e-9, where),
                "mismatch at " << where);
}

TEST_CASE("report writers produce the documented files") {
  TempDir dir("harness-out");
  const auto bench = random_bench(58, 2);
  write_benchmark_outputs(run_benchmark(bench), dir.path(), 20);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "report.txt"));
  CHECK(std::filesystem::is_directory(dir / "roc"));
  CHECK(std::filesystem::is_directory(dir / "hist"));
  write_sweep_outputs(sweep_p(bench, {0.1}), dir.path());
  CHECK(std::filesystem::exists(dir / "sweep.csv"));
  write_morph_outputs(morph_iou(bench, {0.1}, 10), dir.path());
  std::ifstream morph(dir / "morph_iou.csv");
  std::string header;
  std::getline(morph, header);
  CHECK(header == "p,ood_dataset,iou");
}
