#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace factoreeg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration violates its invariants (bad NetConfig, TrainConfig, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A loss, gradient or parameter became non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Problems with dataset contents or on-disk files.
class DataError : public Error {
 public:
  using Error::Error;
};

class MagicMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class MalformedHeaderError : public DataError {
 public:
  using DataError::DataError;
};

class TruncatedFileError : public DataError {
 public:
  TruncatedFileError(const std::string& what, std::uint64_t offset)
      : DataError(what + " (truncated at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace factoreeg
