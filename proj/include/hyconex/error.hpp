#pragma once

#include <stdexcept>
#include <string>

namespace hcx {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data, schema violations, unseen categories.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite losses or gradients during optimisation.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// File system and bundle format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatches and other misuse of the numerical API.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace hcx
