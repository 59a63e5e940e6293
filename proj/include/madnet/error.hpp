#pragma once

#include <stdexcept>
#include <string>

namespace madnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Layer or pooling geometry that does not chain to integer sizes.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Tensor extents that do not agree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced during forward, backward or training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, malformed or inconsistent input files and corpora.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace madnet
