#pragma once

#include <stdexcept>
#include <string>

namespace hte {

struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RngDegeneracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfDomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SerializationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hte
