#pragma once

#include <stdexcept>
#include <string>

namespace bpl {

// Requested factorization size exceeds what the data can supply
// (n_bases > min(element count, element dim)).
class CapacityError : public std::invalid_argument {
 public:
  explicit CapacityError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed or inconsistent files: manifests, sample blobs, checkpoints.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where the numerics require finite ones (NaN loss/gradient).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// API called out of order, e.g. backward without a cached forward.
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& what) : std::logic_error(what) {}
};

// Process exit codes used by the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitDataError = 3,
  kExitNumericalError = 4,
};

}  // namespace bpl
