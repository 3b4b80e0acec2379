// oodscore: command-line front end for scoring, benchmarking, p-sweeps,
// IoU morphing, synthetic fixtures and container inspection.
//
// Exit codes: 0 success, 1 I/O failure, 2 validation / format / config error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oodscore/config.hpp"
#include "oodscore/dataio.hpp"
#include "oodscore/detectors.hpp"
#include "oodscore/error.hpp"
#include "oodscore/harness.hpp"
#include "oodscore/report.hpp"
#include "oodscore/synthetic.hpp"

namespace fs = std::filesystem;
using namespace oodscore;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;

struct ScoreArgs {
  std::string features;
  std::string head;
  std::string detector = "lts";
  double p = kDefaultTopFraction;
  std::optional<double> react_threshold;
  std::string react_calib;
  double react_percentile = 90.0;
  bool relu = false;
  bool no_relu = false;
  bool csv_header = false;
  std::string out;
};

struct ConfigArgs {
  std::string config;
  std::vector<double> grid;
  std::size_t bins = 0;
  std::string out_dir;
};

struct SynthArgs {
  std::uint64_t seed = 7;
  std::string out;
  std::size_t n_id = 2000;
  std::size_t n_ood = 2000;
  std::size_t dim = 256;
};

bool has_csv_extension(const fs::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".csv";
}

int cmd_score(const ScoreArgs& args, unsigned jobs) {
  const HeadDump head = read_head(args.head);
  FeatureMatrix features;
  Metadata feature_meta = Metadata::object();
  if (has_csv_extension(args.features)) {
    features = read_csv_features(args.features, args.csv_header);
  } else {
    FeatureDump dump = read_feature_dump(args.features);
    features = std::move(dump.features);
    feature_meta = std::move(dump.metadata);
  }

  DetectorSpec spec;
  spec.kind = parse_detector_kind(args.detector);
  spec.p = args.p;
  if (args.relu && args.no_relu) {
    throw ValidationError("relu", "--relu and --no-relu are exclusive");
  }
  spec.relu_preprocess =
      args.relu || (!args.no_relu && (backbone_needs_relu(head.metadata) ||
                                      backbone_needs_relu(feature_meta)));
  if (uses_react_threshold(spec.kind)) {
    if (args.react_threshold) {
      spec.react_threshold = *args.react_threshold;
    } else if (!args.react_calib.empty()) {
      const FeatureDump calib = read_feature_dump(args.react_calib);
      spec.react_threshold =
          react_threshold_from_percentile(calib.features, args.react_percentile);
    } else {
      throw ValidationError("react_threshold",
                            "react detectors need --react-threshold or --react-calib");
    }
  }
  spec.validate();

  const auto scores = run_detector(features, head.head, spec, jobs);
  std::string csv = "sample_index,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    csv += std::to_string(i) + "," + format_real(scores[i]) + "\n";
  }
  write_file_bytes(args.out, csv);
  std::cout << "scored " << scores.size() << " samples with " << spec.label()
            << " -> " << args.out << "\n";
  return 0;
}

fs::path output_dir(const RunConfig& cfg, const ConfigArgs& args) {
  return args.out_dir.empty() ? cfg.output_dir : fs::path(args.out_dir);
}

int cmd_eval(const ConfigArgs& args, std::optional<unsigned> jobs) {
  const RunConfig cfg = load_run_config(args.config);
  const Benchmark bench = load_benchmark(cfg);
  const BenchmarkRun run = run_benchmark(bench, jobs.value_or(cfg.jobs));
  const fs::path dir = output_dir(cfg, args);
  write_benchmark_outputs(run, dir, cfg.bins);
  std::cout << render_report_text(run.report);
  std::cout << "wrote " << (dir / "report.json").string() << "\n";
  return 0;
}

int cmd_sweep(const ConfigArgs& args, std::optional<unsigned> jobs) {
  const RunConfig cfg = load_run_config(args.config);
  const Benchmark bench = load_benchmark(cfg);
  const auto grid = args.grid.empty() ? cfg.sweep_grid : args.grid;
  const SweepResult sweep = sweep_p(bench, grid, jobs.value_or(cfg.jobs));
  const fs::path dir = output_dir(cfg, args);
  write_sweep_outputs(sweep, dir);
  std::cout << render_sweep_csv(sweep);
  for (const auto& b : sweep.best) {
    std::cout << "best " << b.ood_dataset << ": AUROC " << format_real(b.best_auroc)
              << " at p=" << format_real(b.best_auroc_p) << ", FPR@95 "
              << format_real(b.best_fpr) << " at p=" << format_real(b.best_fpr_p)
              << "\n";
  }
  return 0;
}

int cmd_morph(const ConfigArgs& args, std::optional<unsigned> jobs) {
  const RunConfig cfg = load_run_config(args.config);
  const Benchmark bench = load_benchmark(cfg);
  const auto grid = args.grid.empty() ? cfg.sweep_grid : args.grid;
  const std::size_t bins = args.bins == 0 ? cfg.bins : args.bins;
  const auto curve = morph_iou(bench, grid, bins, jobs.value_or(cfg.jobs));
  const fs::path dir = output_dir(cfg, args);
  write_morph_outputs(curve, dir);
  std::cout << render_morph_csv(curve);
  return 0;
}

int cmd_synth(const SynthArgs& args) {
  SyntheticBenchSpec spec;
  spec.seed = args.seed;
  spec.n_id = args.n_id;
  spec.n_ood = args.n_ood;
  spec.dim = args.dim;
  const SyntheticBench bench = generate_synthetic(spec);
  const fs::path dir(args.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  write_feature_dump(dir / "id.fdmp", bench.id,
                     make_metadata("synthetic", "penultimate", "synthetic_id", "test"));
  write_feature_dump(dir / "ood.fdmp", bench.ood,
                     make_metadata("synthetic", "penultimate", "synthetic_ood", "test"));
  write_head(dir / "head.head", bench.head,
             make_metadata("synthetic", "fc", "synthetic_id", "train"));

  RunConfig cfg;
  cfg.id = {"synthetic_id", "id.fdmp"};
  cfg.ood = {{"synthetic_ood", "ood.fdmp"}};
  cfg.head = "head.head";
  auto entry = [](DetectorKind kind, double p) {
    DetectorEntry e;
    e.spec.kind = kind;
    e.spec.p = p;
    return e;
  };
  DetectorEntry react = entry(DetectorKind::kReact, kDefaultTopFraction);
  react.react_calibration = "id.fdmp";
  react.react_percentile = 90.0;
  DetectorEntry react_lts = react;
  react_lts.spec.kind = DetectorKind::kReactLts;
  cfg.detectors = {entry(DetectorKind::kMsp, 0.05),   entry(DetectorKind::kEnergy, 0.05),
                   entry(DetectorKind::kLts, 0.05),   react,
                   react_lts,                         entry(DetectorKind::kAshP, 0.1),
                   entry(DetectorKind::kAshB, 0.1),   entry(DetectorKind::kAshS, 0.1),
                   entry(DetectorKind::kScale, 0.15)};
  cfg.output_dir = "report";
  write_file_bytes(dir / "config.json", to_json(cfg).dump(2) + "\n");
  std::cout << "wrote synthetic benchmark (seed " << spec.seed << ") to "
            << dir.string() << "\n";
  return 0;
}

int cmd_inspect(const std::string& file) {
  const ContainerInfo info = inspect_container(file);
  const bool is_head = info.magic == "HEAD";
  std::cout << "file:     " << file << "\n"
            << "format:   " << info.magic << " v" << info.version << "\n"
            << (is_head ? "classes:  " : "samples:  ") << info.rows << "\n"
            << "dim:      " << info.dim << "\n"
            << "bytes:    " << info.file_bytes << "\n"
            << "metadata: " << info.metadata.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post-hoc OOD scoring: LTS, energy and activation-shaping baselines"};
  app.require_subcommand(1);
  std::optional<unsigned> jobs;
  app.add_option("--jobs,-j", jobs, "Parallel work units (N=1 reproduces N>1 bitwise)")
      ->envname("OODSCORE_JOBS")
      ->check(CLI::PositiveNumber);

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score one feature file with one detector");
  score_cmd->add_option("--features", score.features, "FDMP file, or .csv fixture")->required();
  score_cmd->add_option("--head", score.head, "HEAD file")->required();
  score_cmd->add_option("--detector", score.detector,
                        "msp|energy|lts|react|react_lts|ash_p|ash_b|ash_s|scale")
      ->capture_default_str();
  score_cmd->add_option("--p", score.p, "Top-activation fraction")->capture_default_str();
  auto* threshold_opt =
      score_cmd->add_option("--react-threshold", score.react_threshold, "ReAct clip value");
  auto* calib_opt = score_cmd->add_option("--react-calib", score.react_calib,
                                          "FDMP file used to derive the clip value");
  threshold_opt->excludes(calib_opt);
  score_cmd->add_option("--react-percentile", score.react_percentile,
                        "Percentile of --react-calib activations")
      ->capture_default_str();
  score_cmd->add_flag("--relu", score.relu, "Force ReLU before computing the LTS scale");
  score_cmd->add_flag("--no-relu", score.no_relu, "Disable automatic ReLU");
  score_cmd->add_flag("--csv-header", score.csv_header, "CSV features have a header line");
  score_cmd->add_option("--out", score.out, "Output CSV (sample_index,score)")->required();

  ConfigArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Run the full benchmark from a config");
  eval_cmd->add_option("--config", eval_args.config)->required();
  eval_cmd->add_option("--out-dir", eval_args.out_dir, "Override output_dir");

  ConfigArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "LTS metrics over a grid of p values");
  sweep_cmd->add_option("--config", sweep_args.config)->required();
  sweep_cmd->add_option("--grid", sweep_args.grid, "Comma-separated p values")->delimiter(',');
  sweep_cmd->add_option("--out-dir", sweep_args.out_dir, "Override output_dir");

  ConfigArgs morph_args;
  auto* morph_cmd = app.add_subcommand("morph", "ID/OOD histogram IoU as p varies");
  morph_cmd->add_option("--config", morph_args.config)->required();
  morph_cmd->add_option("--grid", morph_args.grid, "Comma-separated p values")->delimiter(',');
  morph_cmd->add_option("--bins", morph_args.bins, "Histogram bins");
  morph_cmd->add_option("--out-dir", morph_args.out_dir, "Override output_dir");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic benchmark");
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--n-id", synth.n_id)->capture_default_str();
  synth_cmd->add_option("--n-ood", synth.n_ood)->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim)->capture_default_str();

  std::string inspect_file;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print header and metadata of an FDMP/HEAD file");
  inspect_cmd->add_option("--file", inspect_file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*score_cmd) return cmd_score(score, jobs.value_or(1));
    if (*eval_cmd) return cmd_eval(eval_args, jobs);
    if (*sweep_cmd) return cmd_sweep(sweep_args, jobs);
    if (*morph_cmd) return cmd_morph(morph_args, jobs);
    if (*synth_cmd) return cmd_synth(synth);
    if (*inspect_cmd) return cmd_inspect(inspect_file);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
