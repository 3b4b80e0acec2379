#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace oodscore {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates a type invariant or an operation precondition.
/// `field()` names the offending field or parameter.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Metric evaluation was asked for something undefined (e.g. no OOD samples).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind {
  kBadMagic,
  kUnknownVersion,
  kTruncated,
  kSizeOverflow,
  kNonFinite,
  kBadMetadata,
  kTrailingData,
};

const char* to_string(FormatErrorKind kind) noexcept;

/// Malformed binary container. `offset()` is the byte offset where the
/// problem was detected.
class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, std::uint64_t offset,
              const std::string& detail);

  FormatErrorKind kind() const noexcept { return kind_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  FormatErrorKind kind_;
  std::uint64_t offset_;
};

/// Malformed CSV cell or shape. Rows and columns are 1-based.
class CsvError : public Error {
 public:
  CsvError(std::size_t row, std::size_t column, const std::string& detail);

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// The operating system refused a read or write.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace oodscore
