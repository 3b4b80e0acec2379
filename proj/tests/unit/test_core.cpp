#include <cmath>
#include <limits>

#include "doctest.h"
#include "oodscore/core.hpp"
#include "oodscore/error.hpp"

using namespace oodscore;

namespace {

template <typename Fn>
std::string failing_field(Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("FeatureMatrix validates shape and finiteness") {
  const FeatureMatrix m(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.n_samples() == 2);
  CHECK(m.dim() == 3);
  CHECK(m.row(1)[0] == 4);

  CHECK(FeatureMatrix(0, 4, {}).n_samples() == 0);
  CHECK(failing_field([] { FeatureMatrix(1, 0, {}); }) == "dim");
  CHECK(failing_field([] { FeatureMatrix(2, 2, {1, 2, 3}); }) == "data");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(failing_field([&] { FeatureMatrix(1, 2, {1, nan}); }) == "data");
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(failing_field([&] { FeatureMatrix(1, 1, {inf}); }) == "data");
}

TEST_CASE("ClassifierHead validates every field") {
  const ClassifierHead head(2, 2, {1, 0, 0, 1}, {0.5, -0.5});
  CHECK(head.weight_row(1)[1] == 1);
  CHECK(failing_field([] { ClassifierHead(0, 2, {}, {}); }) == "n_classes");
  CHECK(failing_field([] { ClassifierHead(1, 2, {1}, {0}); }) == "weights");
  CHECK(failing_field([] { ClassifierHead(1, 1, {1}, {0, 0}); }) == "bias");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(failing_field([&] { ClassifierHead(1, 1, {1}, {nan}); }) == "bias");
}

TEST_CASE("validation is deterministic") {
  for (int i = 0; i < 3; ++i) {
    CHECK(failing_field([] { FeatureMatrix(2, 2, {1, 2, 3}); }) == "data");
  }
}

TEST_CASE("DetectorSpec parameter checks") {
  DetectorSpec spec{DetectorKind::kLts, 0.0};
  CHECK(failing_field([&] { spec.validate(); }) == "p");
  spec.p = 1.5;
  CHECK(failing_field([&] { spec.validate(); }) == "p");
  spec.p = 1.0;
  CHECK_NOTHROW(spec.validate());

  DetectorSpec react{DetectorKind::kReact};
  react.react_threshold = 0.0;
  CHECK(failing_field([&] { react.validate(); }) == "react_threshold");

  // Unused fields are ignored by kinds that do not read them.
  DetectorSpec energy{DetectorKind::kEnergy, -3.0, -1.0};
  CHECK_NOTHROW(energy.validate());
}

TEST_CASE("detector names round-trip and labels are stable") {
  for (auto kind : {DetectorKind::kMsp, DetectorKind::kEnergy, DetectorKind::kLts,
                    DetectorKind::kReact, DetectorKind::kReactLts, DetectorKind::kAshP,
                    DetectorKind::kAshB, DetectorKind::kAshS, DetectorKind::kScale}) {
    CHECK(parse_detector_kind(to_string(kind)) == kind);
  }
  CHECK(failing_field([] { parse_detector_kind("odin"); }) == "kind");

  CHECK(DetectorSpec{DetectorKind::kEnergy}.label() == "energy");
  CHECK(DetectorSpec{DetectorKind::kLts, 0.05}.label() == "lts[p=0.05]");
  DetectorSpec rl{DetectorKind::kReactLts, 0.1, 1.5, true};
  CHECK(rl.label() == "react_lts[p=0.1,c=1.5,relu]");
}

TEST_CASE("ScoredDataset keeps labels beside scores") {
  const std::vector<double> id{1, 2};
  const std::vector<double> ood{0.5};
  const auto s = ScoredDataset::from_split(id, ood);
  CHECK(s.n_id() == 2);
  CHECK(s.n_ood() == 1);
  CHECK(s.ood_scores() == ood);
  CHECK(failing_field([] {
          ScoredDataset({1.0, 2.0}, {SampleLabel::kId});
        }) == "labels");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(failing_field([&] {
          ScoredDataset({nan}, {SampleLabel::kId});
        }) == "scores");
}

TEST_CASE("EvalReport rejects out-of-range metrics and duplicate keys") {
  ReportRow row{"energy", "id", "ood", {0.9, 0.1, 0.8}, 10, 10};
  CHECK_NOTHROW(EvalReport({row}));
  CHECK(failing_field([&] { EvalReport({row, row}); }) == "rows");
  ReportRow bad = row;
  bad.metrics.auroc = 1.2;
  CHECK(failing_field([&] { EvalReport({bad}); }) == "auroc");

  const EvalReport report({row});
  CHECK(report.find("energy", "ood") != nullptr);
  CHECK(report.find("energy", "other") == nullptr);
}

TEST_CASE("SweepResult grid must be strictly increasing inside (0, 1]") {
  SweepResult s;
  s.grid = {0.1, 0.1};
  CHECK(failing_field([&] { s.validate(); }) == "grid");
  s.grid = {0.0, 0.5};
  CHECK(failing_field([&] { s.validate(); }) == "grid");
  s.grid = {0.05, 1.0};
  s.records = {{0.05, "a", {0.5, 0.5, 0.5}}, {0.05, "a", {0.5, 0.5, 0.5}}};
  CHECK(failing_field([&] { s.validate(); }) == "records");
}
