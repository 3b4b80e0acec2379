#include "oodscore/dataio.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <system_error>

#include "oodscore/error.hpp"

namespace oodscore {

Metadata make_metadata(std::string_view model, std::string_view layer,
                       std::string_view dataset, std::string_view split,
                       std::string_view created) {
  Metadata meta = Metadata::object();
  meta["model"] = model;
  meta["layer"] = layer;
  meta["dataset"] = dataset;
  meta["split"] = split;
  meta["created"] = created;
  return meta;
}

std::string metadata_field(const Metadata& metadata, std::string_view key) {
  if (!metadata.is_object()) return {};
  const auto it = metadata.find(key);
  if (it == metadata.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

namespace {

constexpr std::string_view kFeatureMagic = "FDMP";
constexpr std::string_view kHeadMagic = "HEAD";
constexpr std::uint64_t kHeaderBytes = 24;

// Sequential little-endian reader over an in-memory buffer or a file.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual std::uint64_t size() const = 0;
  virtual void read_raw(char* out, std::size_t n) = 0;

  std::uint64_t offset() const { return offset_; }
  std::uint64_t remaining() const { return size() - offset_; }

  void read(char* out, std::size_t n) {
    if (n > remaining()) {
      throw FormatError(FormatErrorKind::kTruncated, size(),
                        "needed " + std::to_string(n) + " bytes at offset " +
                            std::to_string(offset_));
    }
    read_raw(out, n);
    offset_ += n;
  }

  template <typename T>
  T read_le() {
    std::array<unsigned char, sizeof(T)> buf{};
    read(reinterpret_cast<char*>(buf.data()), buf.size());
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(buf[i]) << (8 * i);
    }
    return value;
  }

 private:
  std::uint64_t offset_ = 0;
};

class BufferSource final : public ByteSource {
 public:
  explicit BufferSource(std::string_view bytes) : bytes_(bytes) {}
  std::uint64_t size() const override { return bytes_.size(); }
  void read_raw(char* out, std::size_t n) override {
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

class FileSource final : public ByteSource {
 public:
  explicit FileSource(const std::filesystem::path& path)
      : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
    std::error_code ec;
    size_ = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  }
  std::uint64_t size() const override { return size_; }
  void read_raw(char* out, std::size_t n) override {
    in_.read(out, static_cast<std::streamsize>(n));
    if (!in_) throw IoError("read failed");
  }

 private:
  std::ifstream in_;
  std::uint64_t size_ = 0;
};

// Little-endian writer into a string buffer.
class ByteSink {
 public:
  template <typename T>
  void write_le(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
    }
  }
  void write(std::string_view bytes) { out_.append(bytes); }
  void write_f32(double value, const char* field) {
    const auto narrowed = static_cast<float>(value);
    if (!std::isfinite(narrowed)) {
      throw ValidationError(field, "value does not fit in float32");
    }
    write_le(std::bit_cast<std::uint32_t>(narrowed));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

struct Header {
  std::uint32_t version = 0;
  std::uint64_t rows = 0;
  std::uint64_t dim = 0;
};

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b,
                          std::uint64_t offset) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    throw FormatError(FormatErrorKind::kSizeOverflow, offset,
                      "declared sizes overflow 64 bits");
  }
  return a * b;
}

Header read_header(ByteSource& src, std::string_view magic) {
  std::array<char, 4> got{};
  src.read(got.data(), got.size());
  if (std::string_view(got.data(), got.size()) != magic) {
    throw FormatError(FormatErrorKind::kBadMagic, 0,
                      "expected magic \"" + std::string(magic) + "\"");
  }
  Header h;
  h.version = src.read_le<std::uint32_t>();
  if (h.version != kFormatVersion) {
    throw FormatError(FormatErrorKind::kUnknownVersion, 4,
                      "version " + std::to_string(h.version));
  }
  h.rows = src.read_le<std::uint64_t>();
  h.dim = src.read_le<std::uint64_t>();
  return h;
}

// Total payload floats, checked against overflow, the byte bound and the
// bytes actually present before anything payload-sized is allocated.
std::uint64_t validate_payload(const ByteSource& src, const Header& h,
                               std::uint64_t extra_floats,
                               const ReadOptions& options) {
  const std::uint64_t cells = checked_mul(h.rows, h.dim, 8);
  if (cells > std::numeric_limits<std::uint64_t>::max() - extra_floats) {
    throw FormatError(FormatErrorKind::kSizeOverflow, 8,
                      "declared sizes overflow 64 bits");
  }
  const std::uint64_t floats = cells + extra_floats;
  const std::uint64_t bytes = checked_mul(floats, 4, 8);
  if (bytes > options.max_bytes) {
    throw FormatError(FormatErrorKind::kSizeOverflow, 8,
                      "declared payload of " + std::to_string(bytes) +
                          " bytes exceeds limit of " +
                          std::to_string(options.max_bytes));
  }
  if (bytes > src.remaining()) {
    throw FormatError(FormatErrorKind::kTruncated, src.size(),
                      "declared payload of " + std::to_string(bytes) +
                          " bytes but only " +
                          std::to_string(src.remaining()) + " remain");
  }
  return floats;
}

std::vector<double> read_floats(ByteSource& src, std::uint64_t count) {
  std::vector<double> out(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t at = src.offset();
    const auto bits = src.read_le<std::uint32_t>();
    const double v = std::bit_cast<float>(bits);
    if (!std::isfinite(v)) {
      throw FormatError(FormatErrorKind::kNonFinite, at,
                        "payload value " + std::to_string(i));
    }
    out[i] = v;
  }
  return out;
}

Metadata read_metadata(ByteSource& src, const ReadOptions& options) {
  const std::uint64_t at = src.offset();
  const auto length = src.read_le<std::uint64_t>();
  if (length > options.max_bytes) {
    throw FormatError(FormatErrorKind::kSizeOverflow, at,
                      "metadata length exceeds limit");
  }
  if (length > src.remaining()) {
    throw FormatError(FormatErrorKind::kTruncated, src.size(),
                      "metadata block declares " + std::to_string(length) +
                          " bytes");
  }
  std::string text(length, '\0');
  src.read(text.data(), text.size());
  if (src.remaining() != 0) {
    throw FormatError(FormatErrorKind::kTrailingData, src.offset(),
                      std::to_string(src.remaining()) + " unexpected bytes");
  }
  Metadata meta = Metadata::parse(text, nullptr, /*allow_exceptions=*/false);
  if (meta.is_discarded() || !meta.is_object()) {
    throw FormatError(FormatErrorKind::kBadMetadata, at + 8,
                      "metadata is not a JSON object");
  }
  return meta;
}

void write_metadata(ByteSink& sink, const Metadata& metadata) {
  if (!metadata.is_object()) {
    throw ValidationError("metadata", "must be a JSON object");
  }
  const std::string text = metadata.dump();
  sink.write_le<std::uint64_t>(text.size());
  sink.write(text);
}

FeatureDump decode_feature_dump(ByteSource& src, const ReadOptions& options) {
  const Header h = read_header(src, kFeatureMagic);
  if (h.dim == 0) {
    throw FormatError(FormatErrorKind::kSizeOverflow, 16, "dim must be >= 1");
  }
  const std::uint64_t count = validate_payload(src, h, 0, options);
  std::vector<double> data = read_floats(src, count);
  Metadata meta = read_metadata(src, options);
  return {FeatureMatrix(h.rows, h.dim, std::move(data)), std::move(meta)};
}

HeadDump decode_head(ByteSource& src, const ReadOptions& options) {
  const Header h = read_header(src, kHeadMagic);
  if (h.rows == 0 || h.dim == 0) {
    throw FormatError(FormatErrorKind::kSizeOverflow, h.rows == 0 ? 8 : 16,
                      "n_classes and dim must be >= 1");
  }
  validate_payload(src, h, h.rows, options);
  std::vector<double> weights = read_floats(src, h.rows * h.dim);
  std::vector<double> bias = read_floats(src, h.rows);
  Metadata meta = read_metadata(src, options);
  return {ClassifierHead(h.rows, h.dim, std::move(weights), std::move(bias)),
          std::move(meta)};
}

}  // namespace

std::string encode_feature_dump(const FeatureMatrix& features,
                                const Metadata& metadata) {
  ByteSink sink;
  sink.write(kFeatureMagic);
  sink.write_le<std::uint32_t>(kFormatVersion);
  sink.write_le<std::uint64_t>(features.n_samples());
  sink.write_le<std::uint64_t>(features.dim());
  for (double v : features.data()) sink.write_f32(v, "data");
  write_metadata(sink, metadata);
  return sink.take();
}

FeatureDump decode_feature_dump(std::string_view bytes, ReadOptions options) {
  BufferSource src(bytes);
  return decode_feature_dump(src, options);
}

std::string encode_head(const ClassifierHead& head, const Metadata& metadata) {
  ByteSink sink;
  sink.write(kHeadMagic);
  sink.write_le<std::uint32_t>(kFormatVersion);
  sink.write_le<std::uint64_t>(head.n_classes());
  sink.write_le<std::uint64_t>(head.dim());
  for (double v : head.weights()) sink.write_f32(v, "weights");
  for (double v : head.bias()) sink.write_f32(v, "bias");
  write_metadata(sink, metadata);
  return sink.take();
}

HeadDump decode_head(std::string_view bytes, ReadOptions options) {
  BufferSource src(bytes);
  return decode_head(src, options);
}

FeatureDump read_feature_dump(const std::filesystem::path& path,
                              ReadOptions options) {
  FileSource src(path);
  return decode_feature_dump(src, options);
}

void write_feature_dump(const std::filesystem::path& path,
                        const FeatureMatrix& features,
                        const Metadata& metadata) {
  write_file_bytes(path, encode_feature_dump(features, metadata));
}

HeadDump read_head(const std::filesystem::path& path, ReadOptions options) {
  FileSource src(path);
  return decode_head(src, options);
}

void write_head(const std::filesystem::path& path, const ClassifierHead& head,
                const Metadata& metadata) {
  write_file_bytes(path, encode_head(head, metadata));
}

ContainerInfo inspect_container(const std::filesystem::path& path,
                                ReadOptions options) {
  FileSource src(path);
  std::array<char, 4> magic{};
  src.read(magic.data(), magic.size());
  const std::string_view got(magic.data(), magic.size());
  if (got != kFeatureMagic && got != kHeadMagic) {
    throw FormatError(FormatErrorKind::kBadMagic, 0,
                      "expected magic \"FDMP\" or \"HEAD\"");
  }
  FileSource full(path);
  ContainerInfo info;
  info.magic = std::string(got);
  info.file_bytes = full.size();
  if (got == kFeatureMagic) {
    const FeatureDump dump = decode_feature_dump(full, options);
    info.rows = dump.features.n_samples();
    info.dim = dump.features.dim();
    info.metadata = dump.metadata;
  } else {
    const HeadDump dump = decode_head(full, options);
    info.rows = dump.head.n_classes();
    info.dim = dump.head.dim();
    info.metadata = dump.metadata;
  }
  info.version = kFormatVersion;
  return info;
}

FeatureMatrix parse_csv_features(std::string_view text, bool has_header) {
  std::vector<double> data;
  std::size_t dim = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 && has_header) continue;
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::size_t column = 0;
    for (;;) {
      const std::size_t comma = line.find(',');
      std::string_view cell = line.substr(0, comma);
      ++column;
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) {
        cell.remove_prefix(1);
      }
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) {
        cell.remove_suffix(1);
      }
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      double value = 0.0;
      const auto [end, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc{} || end != cell.data() + cell.size()) {
        throw CsvError(line_no, column,
                       "cannot parse '" + std::string(cell) + "' as a number");
      }
      if (!std::isfinite(value)) {
        throw CsvError(line_no, column, "value is not finite");
      }
      data.push_back(value);
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      dim = column;
    } else if (column != dim) {
      throw CsvError(line_no, std::min(column, dim) + 1,
                     "expected " + std::to_string(dim) + " columns, got " +
                         std::to_string(column));
    }
    ++rows;
  }
  if (rows == 0) throw CsvError(line_no, 1, "no data rows");
  return FeatureMatrix(rows, dim, std::move(data));
}

FeatureMatrix read_csv_features(const std::filesystem::path& path,
                                bool has_header) {
  return parse_csv_features(read_file_bytes(path), has_header);
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string out((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return out;
}

void write_file_bytes(const std::filesystem::path& path,
                      std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace oodscore
