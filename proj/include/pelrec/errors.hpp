#pragma once

#include <stdexcept>
#include <string>

namespace pelrec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, mismatched dimensions, malformed specs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A sample or 2x2 interpolation cell falls outside the frame.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

/// Fewer than three usable rows in an observation system.
class InsufficientObservationsError : public Error {
 public:
  using Error::Error;
};

/// Normal matrix singular or above the configured condition number.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// A retained principal component has (numerically) zero variance.
class DegenerateComponentError : public Error {
 public:
  using Error::Error;
};

/// Noise cannot be calibrated against a zero-variance frame.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

class EmptyDomainError : public Error {
 public:
  using Error::Error;
};

class ZeroVarianceError : public Error {
 public:
  using Error::Error;
};

class InsufficientMembersError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. The message names the byte offset of the problem.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace pelrec
