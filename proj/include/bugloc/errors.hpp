#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bugloc {

// Base for everything this library throws. The CLI maps subtrees of this
// hierarchy to exit codes (config -> 2, data -> 3, runtime -> 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Problems with input files or their contents.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class DimensionMismatch : public DataError {
 public:
  using DataError::DataError;
};

class EmptyFile : public DataError {
 public:
  using DataError::DataError;
};

class InvariantViolation : public DataError {
 public:
  using DataError::DataError;
};

class DuplicateId : public DataError {
 public:
  using DataError::DataError;
};

class DanglingReference : public DataError {
 public:
  using DataError::DataError;
};

class SingleClass : public DataError {
 public:
  using DataError::DataError;
};

class TooFewBugs : public DataError {
 public:
  using DataError::DataError;
};

class GridMismatch : public DataError {
 public:
  using DataError::DataError;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

// Collects non-fatal findings (duplicate vocabulary entries, orphan diff
// lines, excluded bugs, ...). Callers that do not care pass nullptr.
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string message) { warnings.emplace_back(std::move(message)); }
};

inline void warn_into(Diagnostics* diag, std::string message) {
  if (diag != nullptr) diag->warn(std::move(message));
}

}  // namespace bugloc
