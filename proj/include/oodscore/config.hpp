#pragma once

// Declarative benchmark description, stored as JSON. Relative paths resolve
// against the directory holding the config file. A complete annotated example
// lives in docs/run_config.md.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oodscore/core.hpp"
#include "oodscore/dataio.hpp"

namespace oodscore {

struct DatasetRef {
  std::string name;
  std::filesystem::path features;
};

enum class ReluMode { kOff, kOn, kAuto };

/// True when a metadata model/layer tag names a backbone whose penultimate
/// activations can be negative (ViT, Swin, MLP-Mixer, generic transformer or
/// MLP encoders).
bool backbone_needs_relu(const Metadata& metadata);

struct DetectorEntry {
  DetectorSpec spec;
  ReluMode relu = ReluMode::kAuto;
  /// Alternative to spec.react_threshold: percentile of a calibration set.
  std::optional<std::filesystem::path> react_calibration;
  double react_percentile = 90.0;
  /// Row label in reports; defaults to spec.label() after resolution.
  std::optional<std::string> name;
};

inline const std::vector<double> kDefaultSweepGrid{
    0.01, 0.02, 0.05, 0.10, 0.15, 0.20, 0.30, 0.50, 0.65, 0.80, 1.00};

struct RunConfig {
  DatasetRef id;
  std::vector<DatasetRef> ood;
  std::filesystem::path head;
  std::vector<DetectorEntry> detectors;
  std::vector<double> sweep_grid = kDefaultSweepGrid;
  ReluMode sweep_relu = ReluMode::kAuto;
  std::size_t bins = 50;
  double target_tpr = 0.95;
  std::filesystem::path output_dir = "oodscore_out";
  unsigned jobs = 1;

  /// Checks values and that every referenced file exists. Throws
  /// ValidationError naming the offending field (e.g. "detectors[2].p").
  void validate() const;
};

/// Parses without touching the filesystem beyond path resolution.
RunConfig parse_run_config(const nlohmann::json& doc,
                           const std::filesystem::path& base_dir);

/// Reads, parses and validates. Unreadable file -> IoError; malformed JSON or
/// invalid fields -> ValidationError.
RunConfig load_run_config(const std::filesystem::path& path);

/// Serialized form; paths are written as given.
nlohmann::json to_json(const RunConfig& config);

void validate_grid(const std::vector<double>& grid, const char* field);

}  // namespace oodscore
