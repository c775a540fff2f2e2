#pragma once

#include <stdexcept>
#include <string>

namespace hydemic {

// Caller passed something unusable (bad sizes, unknown flags, missing files).
// The CLI maps this family to exit code 2.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// Input data is readable but wrong (malformed rows, shape mismatches,
// corrupt model files). CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, long line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class DimensionError : public DataError {
 public:
  explicit DimensionError(const std::string& what) : DataError(what) {}
};

class DuplicateRecordError : public DataError {
 public:
  explicit DuplicateRecordError(const std::string& what) : DataError(what) {}
};

class LookupError : public DataError {
 public:
  explicit LookupError(const std::string& what) : DataError(what) {}
};

class VersionError : public DataError {
 public:
  explicit VersionError(const std::string& what) : DataError(what) {}
};

class ChecksumError : public DataError {
 public:
  explicit ChecksumError(const std::string& what) : DataError(what) {}
};

// Optimizer hit a non-finite loss or gradient. CLI exit code 4.
class TrainingDivergedError : public std::runtime_error {
 public:
  explicit TrainingDivergedError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hydemic
