#include "oodscore/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "oodscore/error.hpp"

namespace oodscore {
namespace {

using nlohmann::json;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
T get_field(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + key, "missing or has the wrong type");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback,
         const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return get_field<T>(obj, key, where);
}

ReluMode parse_relu(const json& value, const std::string& field) {
  if (value.is_boolean()) return value.get<bool>() ? ReluMode::kOn : ReluMode::kOff;
  if (value.is_string() && value.get<std::string>() == "auto") return ReluMode::kAuto;
  throw ValidationError(field, "must be true, false or \"auto\"");
}

json relu_to_json(ReluMode mode) {
  switch (mode) {
    case ReluMode::kOn: return true;
    case ReluMode::kOff: return false;
    case ReluMode::kAuto: return "auto";
  }
  return "auto";
}

DatasetRef parse_dataset(const json& obj, const std::filesystem::path& base,
                         const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where, "must be an object");
  return {get_field<std::string>(obj, "name", where + "."),
          resolve(base, get_field<std::string>(obj, "features", where + "."))};
}

void require_file(const std::filesystem::path& path, const std::string& field) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw ValidationError(field, "file not found: " + path.string());
  }
}

}  // namespace

bool backbone_needs_relu(const Metadata& metadata) {
  static constexpr std::array<std::string_view, 6> kTags{
      "vit", "swin", "mixer", "transformer", "mlp", "deit"};
  for (const char* key : {"layer", "model"}) {
    const std::string tag = lower(metadata_field(metadata, key));
    for (auto t : kTags) {
      if (tag.find(t) != std::string::npos) return true;
    }
  }
  return false;
}

void validate_grid(const std::vector<double>& grid, const char* field) {
  if (grid.empty()) throw ValidationError(field, "must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 1.0)) {
      throw ValidationError(field, "values must lie in (0, 1]");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw ValidationError(field, "must be strictly increasing");
    }
  }
}

void RunConfig::validate() const {
  if (id.name.empty()) throw ValidationError("id.name", "must not be empty");
  require_file(id.features, "id.features");
  if (ood.empty()) throw ValidationError("ood", "need at least one OOD dataset");
  for (std::size_t i = 0; i < ood.size(); ++i) {
    const std::string where = "ood[" + std::to_string(i) + "]";
    if (ood[i].name.empty() || ood[i].name == kAverageTask) {
      throw ValidationError(where + ".name", "must be non-empty and not \"Average\"");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (ood[j].name == ood[i].name) {
        throw ValidationError(where + ".name", "duplicate dataset name");
      }
    }
    require_file(ood[i].features, where + ".features");
  }
  require_file(head, "head");
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    const std::string where = "detectors[" + std::to_string(i) + "]";
    const auto& d = detectors[i];
    try {
      if (d.react_calibration && uses_react_threshold(d.spec.kind)) {
        DetectorSpec probe = d.spec;
        probe.react_threshold = 1.0;
        probe.validate();
      } else {
        d.spec.validate();
      }
    } catch (const ValidationError& e) {
      throw ValidationError(where + "." + e.field(), e.what());
    }
    if (d.react_calibration) {
      require_file(*d.react_calibration, where + ".react_calibration");
      if (!(d.react_percentile >= 0.0 && d.react_percentile <= 100.0)) {
        throw ValidationError(where + ".react_percentile", "must lie in [0, 100]");
      }
    }
  }
  validate_grid(sweep_grid, "sweep.grid");
  if (bins == 0) throw ValidationError("metrics.bins", "must be at least 1");
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) {
    throw ValidationError("metrics.target_tpr", "must lie in (0, 1]");
  }
  if (output_dir.empty()) throw ValidationError("output_dir", "must not be empty");
}

RunConfig parse_run_config(const json& doc,
                           const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ValidationError("config", "must be a JSON object");
  RunConfig cfg;
  if (!doc.contains("id")) throw ValidationError("id", "missing");
  cfg.id = parse_dataset(doc["id"], base_dir, "id");
  if (!doc.contains("ood") || !doc["ood"].is_array()) {
    throw ValidationError("ood", "must be an array");
  }
  for (std::size_t i = 0; i < doc["ood"].size(); ++i) {
    cfg.ood.push_back(
        parse_dataset(doc["ood"][i], base_dir, "ood[" + std::to_string(i) + "]"));
  }
  cfg.head = resolve(base_dir, get_field<std::string>(doc, "head", ""));

  if (doc.contains("detectors")) {
    if (!doc["detectors"].is_array()) {
      throw ValidationError("detectors", "must be an array");
    }
    for (std::size_t i = 0; i < doc["detectors"].size(); ++i) {
      const json& d = doc["detectors"][i];
      const std::string where = "detectors[" + std::to_string(i) + "].";
      if (!d.is_object()) {
        throw ValidationError("detectors[" + std::to_string(i) + "]",
                              "must be an object");
      }
      DetectorEntry entry;
      try {
        entry.spec.kind = parse_detector_kind(get_field<std::string>(d, "kind", where));
      } catch (const ValidationError& e) {
        throw ValidationError(where + "kind", e.what());
      }
      entry.spec.p = get_or<double>(d, "p", kDefaultTopFraction, where);
      entry.spec.react_threshold =
          get_or<double>(d, "react_threshold", 1.0, where);
      if (uses_react_threshold(entry.spec.kind) &&
          !d.contains("react_threshold") && !d.contains("react_calibration")) {
        throw ValidationError(where + "react_threshold",
                              "react detectors need react_threshold or "
                              "react_calibration");
      }
      if (d.contains("react_calibration")) {
        entry.react_calibration = resolve(
            base_dir, get_field<std::string>(d, "react_calibration", where));
      }
      entry.react_percentile = get_or<double>(d, "react_percentile", 90.0, where);
      if (d.contains("relu")) entry.relu = parse_relu(d["relu"], where + "relu");
      if (d.contains("name")) entry.name = get_field<std::string>(d, "name", where);
      cfg.detectors.push_back(std::move(entry));
    }
  } else {
    DetectorEntry energy;
    energy.spec.kind = DetectorKind::kEnergy;
    DetectorEntry lts;
    lts.spec.kind = DetectorKind::kLts;
    cfg.detectors = {energy, lts};
  }

  if (doc.contains("sweep")) {
    const json& s = doc["sweep"];
    if (s.contains("grid")) {
      cfg.sweep_grid = get_field<std::vector<double>>(s, "grid", "sweep.");
    }
    if (s.contains("relu")) cfg.sweep_relu = parse_relu(s["relu"], "sweep.relu");
  }
  if (doc.contains("metrics")) {
    const json& m = doc["metrics"];
    const auto bins = get_or<long long>(m, "bins", 50, "metrics.");
    if (bins < 1) throw ValidationError("metrics.bins", "must be at least 1");
    cfg.bins = static_cast<std::size_t>(bins);
    cfg.target_tpr = get_or<double>(m, "target_tpr", 0.95, "metrics.");
  }
  if (doc.contains("output_dir")) {
    cfg.output_dir = resolve(base_dir, get_field<std::string>(doc, "output_dir", ""));
  } else {
    cfg.output_dir = base_dir / "oodscore_out";
  }
  if (doc.contains("jobs")) {
    const auto jobs = get_field<long long>(doc, "jobs", "");
    if (jobs < 1) throw ValidationError("jobs", "must be at least 1");
    cfg.jobs = static_cast<unsigned>(jobs);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_file_bytes(path);
  json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    throw ValidationError("config", "not valid JSON: " + path.string());
  }
  RunConfig cfg = parse_run_config(doc, path.parent_path());
  cfg.validate();
  return cfg;
}

json to_json(const RunConfig& config) {
  json doc;
  doc["id"] = {{"name", config.id.name}, {"features", config.id.features.string()}};
  doc["ood"] = json::array();
  for (const auto& o : config.ood) {
    doc["ood"].push_back({{"name", o.name}, {"features", o.features.string()}});
  }
  doc["head"] = config.head.string();
  doc["detectors"] = json::array();
  for (const auto& d : config.detectors) {
    json e{{"kind", std::string(to_string(d.spec.kind))}};
    if (uses_top_fraction(d.spec.kind)) e["p"] = d.spec.p;
    if (uses_react_threshold(d.spec.kind)) {
      if (d.react_calibration) {
        e["react_calibration"] = d.react_calibration->string();
        e["react_percentile"] = d.react_percentile;
      } else {
        e["react_threshold"] = d.spec.react_threshold;
      }
    }
    if (d.spec.kind == DetectorKind::kLts || d.spec.kind == DetectorKind::kReactLts) {
      e["relu"] = relu_to_json(d.relu);
    }
    if (d.name) e["name"] = *d.name;
    doc["detectors"].push_back(std::move(e));
  }
  doc["sweep"] = {{"grid", config.sweep_grid}, {"relu", relu_to_json(config.sweep_relu)}};
  doc["metrics"] = {{"bins", config.bins}, {"target_tpr", config.target_tpr}};
  doc["output_dir"] = config.output_dir.string();
  doc["jobs"] = config.jobs;
  return doc;
}

}  // namespace oodscore
