#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "oodscore/config.hpp"
#include "oodscore/dataio.hpp"
#include "oodscore/detectors.hpp"
#include "oodscore/error.hpp"
#include "oodscore/harness.hpp"
#include "oodscore/metrics.hpp"
#include "oodscore/synthetic.hpp"

namespace py = pybind11;
using namespace oodscore;

namespace {

using Vector = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const double> as_span(const Vector& a) {
  if (a.ndim() != 1) throw ValidationError("array", "expected a 1-D array");
  return {a.data(), static_cast<std::size_t>(a.shape(0))};
}

Vector to_array(const std::vector<double>& v) {
  Vector out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Vector to_array(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  Vector out({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

FeatureMatrix to_features(const Vector& a) {
  if (a.ndim() != 2) throw ValidationError("features", "expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return FeatureMatrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

ClassifierHead to_head(const Vector& weights, const Vector& bias) {
  if (weights.ndim() != 2) throw ValidationError("weights", "expected a 2-D array");
  const auto rows = static_cast<std::size_t>(weights.shape(0));
  const auto cols = static_cast<std::size_t>(weights.shape(1));
  const auto b = as_span(bias);
  return ClassifierHead(rows, cols,
                        std::vector<double>(weights.data(), weights.data() + rows * cols),
                        std::vector<double>(b.begin(), b.end()));
}

py::object metadata_to_py(const Metadata& meta) {
  return py::module_::import("json").attr("loads")(meta.dump());
}

Metadata metadata_from_py(const py::object& obj) {
  if (obj.is_none()) return Metadata::object();
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return Metadata::parse(text);
}

DetectorSpec make_spec(const std::string& kind, double p, double react_threshold,
                       bool relu) {
  DetectorSpec spec;
  spec.kind = parse_detector_kind(kind);
  spec.p = p;
  spec.react_threshold = react_threshold;
  spec.relu_preprocess = relu;
  return spec;
}

py::dict metrics_dict(const MetricTriple& m) {
  py::dict d;
  d["auroc"] = m.auroc;
  d["fpr_at_95"] = m.fpr_at_95;
  d["aupr"] = m.aupr;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Post-hoc OOD scoring: LTS, energy, baselines and metrics";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<EvaluationError>(m, "EvaluationError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<CsvError>(m, "CsvError", base.ptr());
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<ScaleFactor>(m, "ScaleFactor")
      .def_readonly("value", &ScaleFactor::value)
      .def_readonly("s1", &ScaleFactor::s1)
      .def_readonly("s2", &ScaleFactor::s2)
      .def_readonly("k", &ScaleFactor::k)
      .def_readonly("fallback", &ScaleFactor::fallback)
      .def_readonly("s1_negative", &ScaleFactor::s1_negative)
      .def("__repr__", [](const ScaleFactor& s) {
        return "ScaleFactor(value=" + std::to_string(s.value) +
               ", k=" + std::to_string(s.k) + ")";
      });

  m.def("lts_scale_factor",
        [](const Vector& h, double p, bool relu) {
          return lts_scale_factor(as_span(h), p, relu);
        },
        py::arg("h"), py::arg("p") = kDefaultTopFraction, py::arg("relu") = false);
  m.def("logsumexp", [](const Vector& z) { return logsumexp(as_span(z)); });
  m.def("energy_score", [](const Vector& z) { return energy_score(as_span(z)); });
  m.def("msp_score", [](const Vector& z) { return msp_score(as_span(z)); });
  m.def("react_clip",
        [](const Vector& h, double c) { return to_array(react_clip(as_span(h), c)); },
        py::arg("h"), py::arg("threshold"));
  m.def("ash_p", [](const Vector& h, double p) { return to_array(ash_p(as_span(h), p)); });
  m.def("ash_b", [](const Vector& h, double p) { return to_array(ash_b(as_span(h), p)); });
  m.def("ash_s", [](const Vector& h, double p) { return to_array(ash_s(as_span(h), p)); });
  m.def("scale_features",
        [](const Vector& h, double p) { return to_array(scale_features(as_span(h), p)); });

  m.def("compute_logits",
        [](const Vector& features, const Vector& weights, const Vector& bias) {
          const Logits l = compute_logits(to_features(features), to_head(weights, bias));
          return to_array(l.values(), l.n_samples(), l.n_classes());
        },
        py::arg("features"), py::arg("weights"), py::arg("bias"));

  m.def("run_detector",
        [](const Vector& features, const Vector& weights, const Vector& bias,
           const std::string& kind, double p, double react_threshold, bool relu,
           unsigned jobs) {
          const FeatureMatrix f = to_features(features);
          const ClassifierHead head = to_head(weights, bias);
          const DetectorSpec spec = make_spec(kind, p, react_threshold, relu);
          std::vector<double> scores;
          {
            py::gil_scoped_release release;
            scores = run_detector(f, head, spec, jobs);
          }
          return to_array(scores);
        },
        py::arg("features"), py::arg("weights"), py::arg("bias"),
        py::arg("kind") = "lts", py::arg("p") = kDefaultTopFraction,
        py::arg("react_threshold") = 1.0, py::arg("relu") = false, py::arg("jobs") = 1);

  m.def("auroc", [](const Vector& id, const Vector& ood) {
    return auroc(as_span(id), as_span(ood));
  });
  m.def("fpr_at_tpr",
        [](const Vector& id, const Vector& ood, double target) {
          return fpr_at_tpr(as_span(id), as_span(ood), target);
        },
        py::arg("id_scores"), py::arg("ood_scores"), py::arg("target_tpr") = 0.95);
  m.def("aupr", [](const Vector& id, const Vector& ood) {
    return aupr(as_span(id), as_span(ood));
  });
  m.def("distribution_iou",
        [](const Vector& id, const Vector& ood, std::size_t bins) {
          return distribution_iou(as_span(id), as_span(ood), bins);
        },
        py::arg("id_scores"), py::arg("ood_scores"), py::arg("bins") = 50);
  m.def("roc_curve", [](const Vector& id, const Vector& ood) {
    const auto id_s = as_span(id);
    const auto ood_s = as_span(ood);
    const auto curve = roc_curve(ScoredDataset::from_split(id_s, ood_s));
    std::vector<double> t, fpr, tpr;
    for (const auto& pt : curve) {
      t.push_back(pt.threshold);
      fpr.push_back(pt.fpr);
      tpr.push_back(pt.tpr);
    }
    return py::make_tuple(to_array(t), to_array(fpr), to_array(tpr));
  });

  m.def("read_feature_dump", [](const std::filesystem::path& path) {
    const FeatureDump dump = read_feature_dump(path);
    return py::make_tuple(to_array(dump.features.data(), dump.features.n_samples(),
                                   dump.features.dim()),
                          metadata_to_py(dump.metadata));
  });
  m.def("write_feature_dump",
        [](const std::filesystem::path& path, const Vector& features,
           const py::object& metadata) {
          write_feature_dump(path, to_features(features), metadata_from_py(metadata));
        },
        py::arg("path"), py::arg("features"), py::arg("metadata") = py::none());
  m.def("read_head", [](const std::filesystem::path& path) {
    const HeadDump dump = read_head(path);
    return py::make_tuple(
        to_array(dump.head.weights(), dump.head.n_classes(), dump.head.dim()),
        to_array(dump.head.bias()), metadata_to_py(dump.metadata));
  });
  m.def("write_head",
        [](const std::filesystem::path& path, const Vector& weights, const Vector& bias,
           const py::object& metadata) {
          write_head(path, to_head(weights, bias), metadata_from_py(metadata));
        },
        py::arg("path"), py::arg("weights"), py::arg("bias"),
        py::arg("metadata") = py::none());

  m.def("generate_synthetic",
        [](std::uint64_t seed, std::size_t n_id, std::size_t n_ood, std::size_t dim) {
          SyntheticBenchSpec spec;
          spec.seed = seed;
          spec.n_id = n_id;
          spec.n_ood = n_ood;
          spec.dim = dim;
          const SyntheticBench b = generate_synthetic(spec);
          return py::make_tuple(
              to_array(b.id.data(), b.id.n_samples(), b.id.dim()),
              to_array(b.ood.data(), b.ood.n_samples(), b.ood.dim()),
              to_array(b.head.weights(), b.head.n_classes(), b.head.dim()),
              to_array(b.head.bias()));
        },
        py::arg("seed") = 7, py::arg("n_id") = 2000, py::arg("n_ood") = 2000,
        py::arg("dim") = 256);

  m.def("run_benchmark",
        [](const std::filesystem::path& config, unsigned jobs) {
          const EvalReport report = run_benchmark(load_run_config(config), jobs);
          py::list rows;
          for (const auto& r : report.rows()) {
            py::dict d = metrics_dict(r.metrics);
            d["detector"] = r.detector;
            d["id_dataset"] = r.id_dataset;
            d["ood_dataset"] = r.ood_dataset;
            d["n_id"] = r.n_id;
            d["n_ood"] = r.n_ood;
            rows.append(d);
          }
          return rows;
        },
        py::arg("config"), py::arg("jobs") = 1);
  m.def("sweep_p",
        [](const std::filesystem::path& config, std::optional<std::vector<double>> grid,
           unsigned jobs) {
          const RunConfig cfg = load_run_config(config);
          const SweepResult sweep =
              sweep_p(load_benchmark(cfg), grid.value_or(cfg.sweep_grid), jobs);
          py::list records;
          for (const auto& r : sweep.records) {
            py::dict d = metrics_dict(r.metrics);
            d["p"] = r.p;
            d["ood_dataset"] = r.ood_dataset;
            records.append(d);
          }
          return records;
        },
        py::arg("config"), py::arg("grid") = py::none(), py::arg("jobs") = 1);
  m.def("morph_iou",
        [](const std::filesystem::path& config, std::optional<std::vector<double>> grid,
           std::optional<std::size_t> bins, unsigned jobs) {
          const RunConfig cfg = load_run_config(config);
          const auto curve = morph_iou(load_benchmark(cfg), grid.value_or(cfg.sweep_grid),
                                       bins.value_or(cfg.bins), jobs);
          py::list out;
          for (const auto& pt : curve) {
            py::dict d;
            d["p"] = pt.p ? py::object(py::float_(*pt.p)) : py::object(py::none());
            d["ood_dataset"] = pt.ood_dataset;
            d["iou"] = pt.iou;
            out.append(d);
          }
          return out;
        },
        py::arg("config"), py::arg("grid") = py::none(), py::arg("bins") = py::none(),
        py::arg("jobs") = 1);
}
