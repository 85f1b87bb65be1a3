#pragma once

#include <stdexcept>

namespace qmx {

struct ZeroVectorError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonFiniteError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexOutOfRangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct DimensionMismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TooFewPartiesError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptyRunError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NoSolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WitnessNotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qmx
