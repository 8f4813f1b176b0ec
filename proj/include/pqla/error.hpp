#pragma once

#include <stdexcept>
#include <string>

namespace pqla {

// Error categories map one-to-one onto the CLI exit-code contract.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a simulated state leaves the explosion guard.  Carries the
/// first offending fine-grid index so replications can be reported.
class ExplosionError : public SimulationError {
 public:
  ExplosionError(const std::string& what, std::size_t index)
      : SimulationError(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pqla
