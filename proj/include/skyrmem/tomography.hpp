#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "skyrmem/stokes.hpp"

namespace skyrmem {

// Six polarisation projections, each |E_k|^2 with
//   E_H = (E+ + E-) / sqrt2      E_V = i (E+ - E-) / sqrt2
//   E_D = (E_H + E_V) / sqrt2    E_A = (E_H - E_V) / sqrt2
//   E_R = E+                     E_L = E-
// so that I_H - I_V = S1, I_D - I_A = S2, I_R - I_L = S3 of stokes_from_beam.
//
// Images are in camera counts; one unit of |E|^2 is `counts_per_unit` counts.
struct ProjectionSet {
  explicit ProjectionSet(const TransverseGrid& grid) : h(grid), v(grid), d(grid), a(grid), r(grid), l(grid) {}
  const TransverseGrid& grid() const { return h.grid(); }

  RealField h;
  RealField v;
  RealField d;
  RealField a;
  RealField r;
  RealField l;
  double counts_per_unit = 1.0;
  double exposure = 1.0;  // arbitrary units, echoed in outputs

  static constexpr std::array<const char*, 6> kLabels = {"H", "V", "D", "A", "R", "L"};
  std::array<RealField*, 6> images() { return {&h, &v, &d, &a, &r, &l}; }
  std::array<const RealField*, 6> images() const { return {&h, &v, &d, &a, &r, &l}; }
};

struct NoiseModel {
  double shot_scale = 0.0;  // photons at peak S0; 0 disables shot noise
  double read_sigma = 0.0;  // counts
  double background = 0.0;  // counts
  std::uint64_t seed = 0;

  void validate() const;
};

ProjectionSet project_intensity(const VectorBeam& beam);

// With shot_scale > 0 the images are first rescaled so peak S0 maps to
// shot_scale counts and each pixel is replaced by a Poisson draw. Read noise
// and background are then added in counts and the result clipped at 0.
// Every pixel draws from its own counter-based stream keyed by (seed, image,
// pixel), so results do not depend on evaluation order.
ProjectionSet add_camera_noise(const ProjectionSet& ps, const NoiseModel& nm);

// Largest fraction of the S0 budget on which the H+V, D+A and R+L estimates
// may disagree before a calibration warning is raised.
inline constexpr double kCalibrationTolerance = 0.1;

struct Reconstruction {
  StokesField stokes;
  // RMS spread of the three S0 estimates over RMS S0, on samples above
  // kNoisySupportThreshold of peak.
  double consistency_residual = 0.0;
  std::vector<std::string> warnings;
};

// Subtracts background_estimate (counts) from every image, clips at 0 and
// converts back to field units. S0 = I_H + I_V.
Reconstruction reconstruct_stokes(const ProjectionSet& ps, double background_estimate);

// reconstruct_stokes without the residual and warnings.
StokesField reconstruct_stokes_field(const ProjectionSet& ps, double background_estimate);

}  // namespace skyrmem
