#pragma once

#include <stdexcept>
#include <string>

namespace vforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model, training, pool or engine configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Matrix shapes that do not chain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: bad CSV cells, labels out of range, unsplittable classes.
class DataError : public Error {
 public:
  using Error::Error;
};

/// An expectation over an empty set.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : Error(what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace vforge
