#include "skyrmem/beam.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace skyrmem {

VectorBeam::VectorBeam(ScalarField plus, ScalarField minus, std::optional<BeamMeta> meta_in)
    : sigma_plus(std::move(plus)), sigma_minus(std::move(minus)), meta(meta_in) {
  require_same_grid(sigma_plus.grid(), sigma_minus.grid(), "VectorBeam");
}

ScalarField lg_mode(const TransverseGrid& grid, int p, int l, double waist, Diagnostics* diag) {
  if (!(waist > 0.0) || !std::isfinite(waist)) {
    throw ParameterError("LG mode waist must be positive");
  }
  if (p < 0) {
    throw ParameterError("LG radial index must be non-negative");
  }
  const unsigned al = static_cast<unsigned>(std::abs(l));
  if (diag != nullptr && al > 0) {
    const double step = std::max(grid.dx(), grid.dy());
    const double samples_per_fringe = 2.0 * std::numbers::pi * waist / (al * step);
    if (samples_per_fringe < 8.0) {
      std::ostringstream msg;
      msg << "resolution: " << samples_per_fringe << " samples per azimuthal fringe at r = waist for l = " << l
          << " (< 8)";
      diag->warn(msg.str());
    }
  }

  // C = sqrt(2 p! / (pi (p+|l|)!)) / w
  const double log_norm =
      0.5 * (std::log(2.0 / std::numbers::pi) + std::lgamma(p + 1.0) - std::lgamma(p + al + 1.0)) - std::log(waist);
  const double norm = std::exp(log_norm);

  ScalarField out(grid);
  for (std::size_t j = 0; j < grid.ny(); ++j) {
    const double y = grid.y(j);
    for (std::size_t i = 0; i < grid.nx(); ++i) {
      const double x = grid.x(i);
      const double rho2 = (x * x + y * y) / (waist * waist);
      const double radial = std::pow(2.0 * rho2, 0.5 * al) * std::assoc_laguerre(static_cast<unsigned>(p), al, 2.0 * rho2) *
                            std::exp(-rho2);
      out(i, j) = std::polar(norm * radial, l * std::atan2(y, x));
    }
  }
  return out;
}

ScalarField unit_lg_mode(const TransverseGrid& grid, int p, int l, double waist, Diagnostics* diag) {
  ScalarField mode = lg_mode(grid, p, l, waist, diag);
  const double power = field_power(mode);
  if (!(power > 0.0)) {
    throw ParameterError("LG mode has no power on this grid");
  }
  return scaled(mode, 1.0 / std::sqrt(power));
}

VectorBeam make_skyrmion_state(const TransverseGrid& grid, int l, double waist, double weight_ratio,
                               double rel_phase, std::optional<double> waist_minus, Diagnostics* diag) {
  if (l == 0) {
    throw DegenerateStateError("l = 0 gives uniform polarisation, no skyrmion texture");
  }
  if (!(weight_ratio > 0.0) || !std::isfinite(weight_ratio)) {
    throw ParameterError("weight ratio must be positive");
  }
  const double w_minus = waist_minus.value_or(waist);
  const double a = 1.0 / std::sqrt(1.0 + weight_ratio * weight_ratio);
  const double b = weight_ratio * a;
  ScalarField plus = scaled(unit_lg_mode(grid, 0, 0, waist, diag), a);
  ScalarField minus = scaled(unit_lg_mode(grid, 0, l, w_minus, diag), std::polar(b, rel_phase));
  return VectorBeam(std::move(plus), std::move(minus), BeamMeta{l, waist, w_minus, weight_ratio, rel_phase});
}

double field_power(const ScalarField& field) {
  std::vector<double> terms(field.size());
  for (std::size_t k = 0; k < field.size(); ++k) {
    terms[k] = std::norm(field[k]);
  }
  return compensated_sum(terms) * field.grid().cell_area();
}

double total_power(const VectorBeam& beam) {
  std::vector<double> terms(beam.sigma_plus.size());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    terms[k] = std::norm(beam.sigma_plus[k]) + std::norm(beam.sigma_minus[k]);
  }
  return compensated_sum(terms) * beam.grid().cell_area();
}

Complex inner_product(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid(), b.grid(), "inner_product");
  std::vector<Complex> terms(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    terms[k] = std::conj(a[k]) * b[k];
  }
  return compensated_sum(terms) * a.grid().cell_area();
}

ScalarField scaled(const ScalarField& field, Complex factor) {
  ScalarField out(field.grid());
  for (std::size_t k = 0; k < field.size(); ++k) {
    out[k] = factor * field[k];
  }
  return out;
}

VectorBeam scaled(const VectorBeam& beam, Complex plus_factor, Complex minus_factor) {
  return VectorBeam(scaled(beam.sigma_plus, plus_factor), scaled(beam.sigma_minus, minus_factor), beam.meta);
}

}  // namespace skyrmem
