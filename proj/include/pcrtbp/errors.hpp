#pragma once

#include <stdexcept>
#include <string>

namespace pcrtbp {

// Chart conversion attempted at (or too close to) a coordinate singularity.
struct SingularChartError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside an operation's domain (wrong half-line, excluded window, ...).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// (state, h) pair not on the requested energy level.
struct EnergyMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Root not bracketed, manifold trace did not arrive, etc.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pcrtbp
