#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "skyrmem/error.hpp"

namespace skyrmem {

using Complex = std::complex<double>;

// Uniform transverse sampling of the square [-extent, extent]^2, lengths in
// units of the fundamental waist w0.
//
// Sample centres sit at x_i = -extent + (i + 1/2) dx. Counts must be even, so
// the beam axis x = y = 0 always falls between the four central samples and a
// vortex core never lands on a sample.
class TransverseGrid {
 public:
  TransverseGrid(std::size_t nx, std::size_t ny, double extent);
  static TransverseGrid square(std::size_t n, double extent) { return {n, n, extent}; }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return nx_ * ny_; }
  double extent() const { return extent_; }
  double dx() const { return 2.0 * extent_ / static_cast<double>(nx_); }
  double dy() const { return 2.0 * extent_ / static_cast<double>(ny_); }
  double cell_area() const { return dx() * dy(); }

  double x(std::size_t i) const { return -extent_ + (static_cast<double>(i) + 0.5) * dx(); }
  double y(std::size_t j) const { return -extent_ + (static_cast<double>(j) + 0.5) * dy(); }
  // Row-major: x varies fastest.
  std::size_t index(std::size_t i, std::size_t j) const { return j * nx_ + i; }

  bool operator==(const TransverseGrid& other) const = default;

 private:
  std::size_t nx_;
  std::size_t ny_;
  double extent_;
};

// Values sampled on a TransverseGrid, row-major.
template <typename T>
class Field {
 public:
  explicit Field(const TransverseGrid& grid, T fill = T{})
      : grid_(grid), values_(grid.size(), fill) {}
  Field(const TransverseGrid& grid, std::vector<T> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw ParameterError("field value count does not match grid size");
    }
  }

  const TransverseGrid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  T& operator()(std::size_t i, std::size_t j) { return values_[grid_.index(i, j)]; }
  const T& operator()(std::size_t i, std::size_t j) const { return values_[grid_.index(i, j)]; }
  T& operator[](std::size_t k) { return values_[k]; }
  const T& operator[](std::size_t k) const { return values_[k]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

 private:
  TransverseGrid grid_;
  std::vector<T> values_;
};

using ScalarField = Field<Complex>;
using RealField = Field<double>;

inline void require_same_grid(const TransverseGrid& a, const TransverseGrid& b, const char* what) {
  if (!(a == b)) {
    throw ParameterError(std::string("grid mismatch in ") + what);
  }
}

// Neumaier-compensated sum in index order; the result does not depend on how
// callers partition the work that produced the terms.
double compensated_sum(std::span<const double> terms);
Complex compensated_sum(std::span<const Complex> terms);

}  // namespace skyrmem
