#pragma once

#include <optional>

#include "skyrmem/grid.hpp"

namespace skyrmem {

// How a VectorBeam was synthesised. Decomposition uses it to pick the stored
// modal basis without projecting.
struct BeamMeta {
  int l = 0;
  double waist_plus = 1.0;   // waist of the sigma+ (LG^0_0) component
  double waist_minus = 1.0;  // waist of the sigma- (LG^l_0) component
  double weight_ratio = 1.0;
  double rel_phase = 0.0;
};

// Paraxial field in the circular basis. sigma_plus carries (x + iy)/sqrt(2).
struct VectorBeam {
  VectorBeam(ScalarField plus, ScalarField minus, std::optional<BeamMeta> meta_in = std::nullopt);

  const TransverseGrid& grid() const { return sigma_plus.grid(); }

  ScalarField sigma_plus;
  ScalarField sigma_minus;
  std::optional<BeamMeta> meta;
};

// LG_p^l amplitude at the waist plane, normalised to unit power on the
// continuum. Phase factor exp(i l atan2(y, x)). A resolution warning is
// pushed to `diag` when the grid has fewer than 8 samples per azimuthal
// fringe at r = waist.
ScalarField lg_mode(const TransverseGrid& grid, int p, int l, double waist, Diagnostics* diag = nullptr);

// lg_mode rescaled so its discrete power is exactly 1 on this grid.
ScalarField unit_lg_mode(const TransverseGrid& grid, int p, int l, double waist, Diagnostics* diag = nullptr);

// a LG^0_0 sigma+ + b e^{i rel_phase} LG^l_0 sigma-, b/a = weight_ratio, total
// power 1. Negative l gives the opposite-orientation texture. `waist_minus`
// overrides the waist of the LG^l_0 component for mode-mismatch studies.
VectorBeam make_skyrmion_state(const TransverseGrid& grid, int l, double waist, double weight_ratio,
                               double rel_phase, std::optional<double> waist_minus = std::nullopt,
                               Diagnostics* diag = nullptr);

double field_power(const ScalarField& field);
double total_power(const VectorBeam& beam);

// <a|b> = sum conj(a) b dA
Complex inner_product(const ScalarField& a, const ScalarField& b);

ScalarField scaled(const ScalarField& field, Complex factor);
VectorBeam scaled(const VectorBeam& beam, Complex plus_factor, Complex minus_factor);

}  // namespace skyrmem
