#pragma once

#include <stdexcept>
#include <string>

namespace dobcbf {

// Every failure the library raises derives from Error so callers (and the C
// API boundary) can catch one type and still dispatch on the category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector/matrix shapes disagree with declared system dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A tuning parameter violates its strict bound (poles, alpha/gamma/nu, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A required callback or configuration entry is missing or malformed.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

// Non-finite input data.
class InputError : public Error {
 public:
  using Error::Error;
};

// Integration produced a non-finite value, a matrix solve failed, etc.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Physical model violates a structural property (e.g. non-SPD inertia).
class ModelError : public Error {
 public:
  using Error::Error;
};

// Operation requested in a mode where it has no meaning.
class NotApplicableError : public Error {
 public:
  using Error::Error;
};

}  // namespace dobcbf
