#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace skyrmem {

// Base of every error raised by the library. The scenario runner maps the
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or mismatched inputs (non-positive waist, grid mismatch...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A skyrmion state was requested for l = 0, which carries no texture.
class DegenerateStateError : public Error {
 public:
  using Error::Error;
};

// No sample survives the support threshold.
class EmptySupportError : public Error {
 public:
  using Error::Error;
};

// Explicit integrator step above the stability bound.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double suggested_step)
      : Error(what), suggested_step_(suggested_step) {}
  double suggested_step() const { return suggested_step_; }

 private:
  double suggested_step_;
};

// Probe is not weak compared to the control field.
class RegimeError : public Error {
 public:
  using Error::Error;
};

// Input and retrieval windows of a storage trace overlap.
class WindowingError : public Error {
 public:
  using Error::Error;
};

// Retrieval phase requested for a path that retrieved nothing.
class UndefinedPhaseError : public Error {
 public:
  using Error::Error;
};

// Beam cannot be expressed in the two-mode stored basis.
class NonBasisBeamError : public Error {
 public:
  using Error::Error;
};

// Collects non-fatal diagnostics (resolution and boundary warnings).
struct Diagnostics {
  std::vector<std::string> warnings;
  void warn(std::string message) { warnings.push_back(std::move(message)); }
};

}  // namespace skyrmem
