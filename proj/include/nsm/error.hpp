#pragma once

#include <stdexcept>
#include <string>

namespace nsm {

// Invalid arguments, malformed configs, mismatched grids.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Singular systems, failed factorisations, non-finite chain state.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nsm
