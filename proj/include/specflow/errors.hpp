#pragma once

#include <stdexcept>
#include <string>

namespace specflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (non-Hermitian block, bad shape, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A scalar function was undefined (non-finite) at a point where it must be evaluated.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Trace requested on an operator whose essential part is not zero.
class NotTraceClass : public Error {
 public:
  using Error::Error;
};

class NoCalkinModel : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

/// Two operators (or a path and its endpoints) do not share dimension or essential points.
class InvalidPair : public Error {
 public:
  using Error::Error;
};

class InvalidKernel : public Error {
 public:
  using Error::Error;
};

/// Weight support is not contained in [-delta, delta] for the path's delta.
class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

class PathTooWild : public Error {
 public:
  using Error::Error;
};

class DegenerateCrossing : public Error {
 public:
  using Error::Error;
};

class ModelViolation : public Error {
 public:
  using Error::Error;
};

class GeneratorError : public Error {
 public:
  using Error::Error;
};

class NotClosed : public Error {
 public:
  using Error::Error;
};

}  // namespace specflow
