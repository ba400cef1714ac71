#include "skyrmem/stokes.hpp"

#include <algorithm>
#include <cmath>

namespace skyrmem {

StokesField stokes_from_beam(const VectorBeam& beam) {
  StokesField out(beam.grid());
  for (std::size_t k = 0; k < beam.sigma_plus.size(); ++k) {
    const Complex ep = beam.sigma_plus[k];
    const Complex em = beam.sigma_minus[k];
    const double ip = std::norm(ep);
    const double im = std::norm(em);
    const Complex cross = std::conj(ep) * em;
    out.s0[k] = ip + im;
    out.s1[k] = 2.0 * cross.real();
    out.s2[k] = 2.0 * cross.imag();
    out.s3[k] = ip - im;
  }
  return out;
}

UnitStokesField normalize_stokes(const StokesField& field, double support_threshold) {
  if (!(support_threshold > 0.0 && support_threshold < 1.0)) {
    throw ParameterError("support threshold must lie in (0, 1)");
  }
  const auto s0 = field.s0.values();
  const double peak = s0.empty() ? 0.0 : *std::max_element(s0.begin(), s0.end());
  if (!(peak > 0.0)) {
    throw EmptySupportError("Stokes field is dark everywhere");
  }
  const double floor = support_threshold * peak;
  UnitStokesField out(field.grid());
  for (std::size_t k = 0; k < field.s0.size(); ++k) {
    if (!(field.s0[k] >= floor) || field.s0[k] <= 0.0) {
      continue;
    }
    double sx = field.s1[k] / field.s0[k];
    double sy = field.s2[k] / field.s0[k];
    double sz = field.s3[k] / field.s0[k];
    // Measured data need not be fully polarised; project onto the sphere.
    const double norm = std::sqrt(sx * sx + sy * sy + sz * sz);
    if (!(norm > 0.0)) {
      continue;
    }
    out.sx[k] = sx / norm;
    out.sy[k] = sy / norm;
    out.sz[k] = sz / norm;
    out.mask[k] = 1;
  }
  return out;
}

StokesTotals integrate_stokes(const StokesField& field) {
  const double area = field.grid().cell_area();
  return {compensated_sum(field.s0.values()) * area, compensated_sum(field.s1.values()) * area,
          compensated_sum(field.s2.values()) * area, compensated_sum(field.s3.values()) * area};
}

}  // namespace skyrmem
