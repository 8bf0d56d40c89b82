#pragma once

#include <stdexcept>
#include <string>

namespace regen {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, dimension mismatches, malformed config files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Newton iteration for an implicit step hit its iteration cap.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// A sample did not extinguish within the configured time cap.
class NoExtinction : public Error {
 public:
  using Error::Error;
};

/// A regeneration cycle exceeded the per-cycle chain step cap.
class CycleCapExceeded : public Error {
 public:
  using Error::Error;
};

/// Path evaluation requested beyond the simulated horizon.
class OutOfHorizon : public Error {
 public:
  using Error::Error;
};

class QuadratureBudgetExceeded : public Error {
 public:
  using Error::Error;
};

class InsufficientCycles : public Error {
 public:
  using Error::Error;
};

/// A normality test was requested against a zero-variance limit.
class DegenerateSigma : public Error {
 public:
  using Error::Error;
};

/// The drift hypothesis -kappa E[beta] + E[|eta|^rho] < 0 does not hold.
class DriftViolated : public Error {
 public:
  using Error::Error;
};

}  // namespace regen
