#pragma once

#include <stdexcept>
#include <string>

namespace sebf {

// Error taxonomy mirrored by the CLI exit codes:
//   ConfigError -> 2, DataError -> 3, NumericalError -> 4.
// Everything else is a plain std::runtime_error and exits 1.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violation of an internal API contract (e.g. mixing sufficient statistics
// built for one range value with a factorization built for another).
struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// Cholesky failure; carries the pivot (1-based) where the factorization broke.
struct NotPositiveDefinite : NumericalError {
  int pivot;
  NotPositiveDefinite(int pivot_, const std::string& msg)
      : NumericalError(msg), pivot(pivot_) {}
};

}  // namespace sebf
