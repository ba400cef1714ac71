#include "skyrmem/grid.hpp"

#include <cmath>
#include <string>

namespace skyrmem {

TransverseGrid::TransverseGrid(std::size_t nx, std::size_t ny, double extent)
    : nx_(nx), ny_(ny), extent_(extent) {
  if (nx < 16 || ny < 16) {
    throw ParameterError("grid needs at least 16 samples per axis");
  }
  if (nx % 2 != 0 || ny % 2 != 0) {
    throw ParameterError("grid sample counts must be even (axis between central samples)");
  }
  if (!(extent > 0.0) || !std::isfinite(extent)) {
    throw ParameterError("grid extent must be positive and finite");
  }
}

double compensated_sum(std::span<const double> terms) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : terms) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

Complex compensated_sum(std::span<const Complex> terms) {
  std::vector<double> re(terms.size());
  std::vector<double> im(terms.size());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    re[k] = terms[k].real();
    im[k] = terms[k].imag();
  }
  return {compensated_sum(re), compensated_sum(im)};
}

}  // namespace skyrmem
