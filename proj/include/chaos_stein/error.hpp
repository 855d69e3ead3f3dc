#pragma once

#include <stdexcept>
#include <string>

namespace chaos_stein {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A requested size or order exceeds what the implementation supports.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Caller-side contract violation (bad argument, model not normalized, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A numerical evaluation produced a non-finite or non-convergent value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class UndefinedRankError : public Error {
 public:
  using Error::Error;
};

class InfiniteMomentError : public Error {
 public:
  using Error::Error;
};

class BinningError : public Error {
 public:
  using Error::Error;
};

// Sum of |rho(k)|^d diverges; no Gaussian limit is claimed.
class SummabilityError : public Error {
 public:
  using Error::Error;
};

// An identity that must hold for any chaos element failed.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace chaos_stein
