#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace driftlab {

// Every failure the toolkit raises derives from Error so callers can catch
// one type at the boundary (the CLI maps these onto exit codes).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command line, missing input or invalid configuration (CLI exit 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Bad argument or precondition violation.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Data failed a structural check (wrong dimension, corrupt cache line, ...).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

class MissingEmbeddingError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class DegenerateSampleError : public Error {
 public:
  using Error::Error;
};

class TsneError : public Error {
 public:
  TsneError(const std::string& what, std::size_t iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace driftlab
