#pragma once

#include <stdexcept>
#include <string>

namespace bdarma {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: wrong dimensions, non-finite values, boundary compositions.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Data failed an integrity check during panel construction.
class IntegrityError : public Error {
 public:
  IntegrityError(const std::string& what, double fraction) : Error(what), fraction_(fraction) {}
  double fraction() const noexcept { return fraction_; }

 private:
  double fraction_;
};

/// Non-finite intermediate values or singular linear systems.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The sampler could not start or never produced a usable transition.
class SamplerError : public Error {
 public:
  using Error::Error;
};

/// Network retrieval failed.
class FetchError : public Error {
 public:
  using Error::Error;
};

/// A CSV or JSON file could not be parsed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem read/write failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bdarma
