#pragma once

#include <stdexcept>
#include <string>

namespace nmh {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// 2*alpha <= 2*a1 + beta leaves no positive gamma.
class NoAdmissibleGamma : public Error {
 public:
  using Error::Error;
};

/// The right inverse could not be evaluated (singular or ill-conditioned solve).
class SolverFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace nmh
