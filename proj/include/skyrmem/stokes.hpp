#pragma once

#include <cstdint>

#include "skyrmem/beam.hpp"

namespace skyrmem {

// Spatially resolved Stokes parameters in the circular basis:
//   S0 = |E+|^2 + |E-|^2        S1 = 2 Re(conj(E+) E-)
//   S3 = |E+|^2 - |E-|^2        S2 = 2 Im(conj(E+) E-)
// S3 = +S0 is pure sigma+.
struct StokesField {
  explicit StokesField(const TransverseGrid& grid) : s0(grid), s1(grid), s2(grid), s3(grid) {}
  const TransverseGrid& grid() const { return s0.grid(); }

  RealField s0;
  RealField s1;
  RealField s2;
  RealField s3;
};

using Mask = Field<std::uint8_t>;

// Unit Poincare vector s = (S1, S2, S3) / S0 where S0 passes the support
// threshold; mask is 0 elsewhere and those samples carry s = 0.
struct UnitStokesField {
  explicit UnitStokesField(const TransverseGrid& grid) : sx(grid), sy(grid), sz(grid), mask(grid, 0) {}
  const TransverseGrid& grid() const { return sx.grid(); }

  RealField sx;
  RealField sy;
  RealField sz;
  Mask mask;
};

// Support thresholds, as fractions of peak S0. The synthetic value only
// guards the division: analytic fields keep full relative precision far into
// the Gaussian tails, and the integration window must stay inside the mask.
// The noisy value keeps the rim where S0 is well above a read noise of 1% of
// peak.
inline constexpr double kSyntheticSupportThreshold = 1e-30;
inline constexpr double kNoisySupportThreshold = 0.15;

StokesField stokes_from_beam(const VectorBeam& beam);

UnitStokesField normalize_stokes(const StokesField& field, double support_threshold);

struct StokesTotals {
  double s0 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
};

// Globally integrated Stokes parameters (sum times cell area).
StokesTotals integrate_stokes(const StokesField& field);

}  // namespace skyrmem
