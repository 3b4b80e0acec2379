#pragma once

// Binary containers for exported activations (FDMP) and classifier heads
// (HEAD), plus CSV ingestion for small hand-made fixtures.
//
// Both containers are little-endian:
//
//   offset  size        field
//   0       4           magic "FDMP" or "HEAD"
//   4       4   u32     version (1)
//   8       8   u64     rows      (n_samples or n_classes)
//   16      8   u64     dim
//   24      rows*dim*4  f32 payload, row-major
//   ...     rows*4      f32 bias (HEAD only)
//   ...     8   u64     metadata length L
//   ...     L           UTF-8 JSON object {model, layer, dataset, split, created}
//
// Values are float32 on disk and widened to double in memory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "oodscore/core.hpp"

namespace oodscore {

using Metadata = nlohmann::ordered_json;

Metadata make_metadata(std::string_view model, std::string_view layer,
                       std::string_view dataset, std::string_view split,
                       std::string_view created = {});

/// String value of `key`, or "" when absent or not a string.
std::string metadata_field(const Metadata& metadata, std::string_view key);

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint64_t kDefaultMaxBytes = std::uint64_t{8} << 30;

struct ReadOptions {
  /// Upper bound on any declared payload or metadata size.
  std::uint64_t max_bytes = kDefaultMaxBytes;
};

struct FeatureDump {
  FeatureMatrix features;
  Metadata metadata = Metadata::object();
};

struct HeadDump {
  ClassifierHead head;
  Metadata metadata = Metadata::object();
};

std::string encode_feature_dump(const FeatureMatrix& features,
                                const Metadata& metadata = Metadata::object());
FeatureDump decode_feature_dump(std::string_view bytes, ReadOptions options = {});

std::string encode_head(const ClassifierHead& head,
                        const Metadata& metadata = Metadata::object());
HeadDump decode_head(std::string_view bytes, ReadOptions options = {});

FeatureDump read_feature_dump(const std::filesystem::path& path,
                              ReadOptions options = {});
void write_feature_dump(const std::filesystem::path& path,
                        const FeatureMatrix& features,
                        const Metadata& metadata = Metadata::object());

HeadDump read_head(const std::filesystem::path& path, ReadOptions options = {});
void write_head(const std::filesystem::path& path, const ClassifierHead& head,
                const Metadata& metadata = Metadata::object());

/// Header-level view of either container, for inspection.
struct ContainerInfo {
  std::string magic;
  std::uint32_t version = 0;
  std::uint64_t rows = 0;
  std::uint64_t dim = 0;
  std::uint64_t file_bytes = 0;
  Metadata metadata = Metadata::object();
};

ContainerInfo inspect_container(const std::filesystem::path& path,
                                ReadOptions options = {});

/// Rectangular numeric CSV, one sample per line. Throws CsvError with the
/// 1-based row/column of the first ragged row or unparseable cell.
FeatureMatrix parse_csv_features(std::string_view text, bool has_header = false);
FeatureMatrix read_csv_features(const std::filesystem::path& path,
                                bool has_header = false);

/// Whole-file helpers. Throw IoError when the file cannot be opened.
std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace oodscore
