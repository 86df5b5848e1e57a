#pragma once

#include <stdexcept>
#include <string>

namespace babbling {

struct DegenerateInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateDirection : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalBreakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MismatchedPopulation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularComponent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace babbling
