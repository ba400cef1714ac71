#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skyrmem/stokes.hpp"

namespace skyrmem {

// Topological charge density s . (d_x s x d_y s) by finite differences on the
// masked support: 4th-order central stencils where four masked neighbours
// exist along the axis, 2nd-order central next to the mask edge, 1st-order
// one-sided where only one neighbour is available. Zero off the mask.
RealField skyrmion_density(const UnitStokesField& u);

struct TopologyOptions {
  // Compactify everything outside the integration disk onto the pole nearest
  // the rim, adding the solid angle the rim curve encloses about that pole.
  // Without it the result is the bare windowed integral.
  bool close_boundary = true;
  double boundary_warning_rad = 0.2;
};

struct TopologyReport {
  double n_skyr = 0.0;
  // (1/4pi) sum density dA over the integration disk, no closure.
  double n_open = 0.0;
  double rim_solid_angle = 0.0;
  int closure_pole = 0;  // +1 north (sigma+), -1 south (sigma-), 0 closure disabled
  double boundary_pole_deviation = 0.0;
  double window_radius = 0.0;
  // Radius actually integrated; smaller than window_radius when the support
  // mask or grid edge cuts into the window.
  double integration_radius = 0.0;
  TransverseGrid grid;
  RealField density;
  std::vector<std::string> warnings;

  double integer_deviation() const;
};

inline constexpr double kDefaultWindowRadius = 5.0;

TopologyReport skyrmion_number(const UnitStokesField& u, double window_radius,
                               const TopologyOptions& options = {});

// (1/4pi) sum of a precomputed density over masked samples with inside(x, y).
double region_charge(const UnitStokesField& u, const RealField& density,
                     const std::function<bool(double, double)>& inside);

// sqrt(1 - |S1,S2,S3|^2 / S0^2) of the globally integrated Stokes vector.
double concurrence(const StokesField& field);
double concurrence(const VectorBeam& beam);

// Keys: n_skyr, window_radius, boundary_pole_deviation, grid {nx, ny, extent},
// plus n_open, integration_radius, closure_pole, rim_solid_angle, warnings.
nlohmann::json to_json(const TopologyReport& report);

}  // namespace skyrmem
