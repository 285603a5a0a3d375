#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sermm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violates its documented range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A matrix or vector has the wrong shape.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A signal is shorter than the operation needs.
class TooShortError : public Error {
 public:
  TooShortError(std::size_t required, std::size_t actual)
      : Error("signal too short: need at least " + std::to_string(required) +
              " samples, got " + std::to_string(actual)),
        required_(required),
        actual_(actual) {}

  std::size_t required() const noexcept { return required_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t required_;
  std::size_t actual_;
};

/// Per-speaker context (e.g. medians) used with the wrong speaker.
class ContextError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing input data (files, manifests, caches).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Feature cache written by a different pipeline version or config.
class CacheError : public DataError {
 public:
  using DataError::DataError;
};

/// Training data lacks at least one class.
class MissingClassError : public Error {
 public:
  using Error::Error;
};

/// An internal consistency check failed.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace sermm
