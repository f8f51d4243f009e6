#pragma once

#include <stdexcept>
#include <string>

namespace demnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument is out of its documented range.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// A backward pass was requested without a matching fresh forward cache.
class StaleCacheError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid dataset content (unknown class folder, undecodable image...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Raised when a run configuration key or value is rejected.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss) or could not start.
class TrainingError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind {
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kUnknownDtype,
  kLabelCountMismatch,
  kMalformed,
  kTrailingData,
};

const char* to_string(FormatErrorKind kind);

/// Binary container or checkpoint could not be decoded.
class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& detail)
      : Error(std::string(to_string(kind)) + (detail.empty() ? "" : ": " + detail)),
        kind_(kind) {}

  FormatErrorKind kind() const { return kind_; }

 private:
  FormatErrorKind kind_;
};

inline const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic: return "bad magic";
    case FormatErrorKind::kUnsupportedVersion: return "unsupported version";
    case FormatErrorKind::kTruncated: return "truncated payload";
    case FormatErrorKind::kUnknownDtype: return "unknown dtype code";
    case FormatErrorKind::kLabelCountMismatch: return "label count mismatch";
    case FormatErrorKind::kMalformed: return "malformed content";
    case FormatErrorKind::kTrailingData: return "trailing data";
  }
  return "format error";
}

}  // namespace demnet
