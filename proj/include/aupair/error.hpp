#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace aupair {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed records, invalid configuration, broken invariants of
// user-supplied data. Maps to CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
  explicit ValidationError(const std::vector<std::string>& problems);
};

// Missing runner binary, unusable temp directory and similar host problems.
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

class CacheMiss : public Error {
 public:
  using Error::Error;
};

class NoCodeFound : public Error {
 public:
  NoCodeFound() : Error("no code found") {}
};

// An upstream pipeline artifact is absent from the work directory.
class MissingArtifact : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace aupair
