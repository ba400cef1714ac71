#include "skyrmem/topology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace skyrmem {

namespace {

using Vec3 = std::array<double, 3>;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Signed solid angle of the spherical triangle (a, b, c), unit vectors.
double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double num = dot(a, cross(b, c));
  const double den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
  return 2.0 * std::atan2(num, den);
}

// Derivative of one component along an axis. `at(k)` reads the component at
// offset k from the sample, `ok(k)` tells whether that neighbour is usable.
template <typename At, typename Ok>
double stencil(At at, Ok ok, double h) {
  const bool m1 = ok(-1);
  const bool p1 = ok(1);
  if (m1 && p1) {
    if (ok(-2) && ok(2)) {
      return (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
    }
    return (at(1) - at(-1)) / (2.0 * h);
  }
  if (p1) {
    return (at(1) - at(0)) / h;
  }
  if (m1) {
    return (at(0) - at(-1)) / h;
  }
  return 0.0;
}

Vec3 interpolate_unit(const UnitStokesField& u, double x, double y) {
  const auto& g = u.grid();
  const double fx = (x + g.extent()) / g.dx() - 0.5;
  const double fy = (y + g.extent()) / g.dy() - 0.5;
  const auto i = static_cast<std::size_t>(std::floor(fx));
  const auto j = static_cast<std::size_t>(std::floor(fy));
  const double tx = fx - std::floor(fx);
  const double ty = fy - std::floor(fy);
  auto blend = [&](const RealField& f) {
    return f(i, j) * (1 - tx) * (1 - ty) + f(i + 1, j) * tx * (1 - ty) + f(i, j + 1) * (1 - tx) * ty +
           f(i + 1, j + 1) * tx * ty;
  };
  Vec3 v{blend(u.sx), blend(u.sy), blend(u.sz)};
  const double n = std::sqrt(dot(v, v));
  if (n > 0.0) {
    for (double& c : v) c /= n;
  }
  return v;
}

}  // namespace

RealField skyrmion_density(const UnitStokesField& u) {
  const auto& g = u.grid();
  const auto nx = static_cast<long>(g.nx());
  const auto ny = static_cast<long>(g.ny());
  RealField density(g);
  const std::array<const RealField*, 3> comps{&u.sx, &u.sy, &u.sz};

  for (long j = 0; j < ny; ++j) {
    for (long i = 0; i < nx; ++i) {
      if (!u.mask(i, j)) continue;
      auto ok_x = [&](long k) { return i + k >= 0 && i + k < nx && u.mask(i + k, j) != 0; };
      auto ok_y = [&](long k) { return j + k >= 0 && j + k < ny && u.mask(i, j + k) != 0; };
      Vec3 s{};
      Vec3 dsx{};
      Vec3 dsy{};
      for (int c = 0; c < 3; ++c) {
        const RealField& f = *comps[c];
        s[c] = f(i, j);
        dsx[c] = stencil([&](long k) { return f(i + k, j); }, ok_x, g.dx());
        dsy[c] = stencil([&](long k) { return f(i, j + k); }, ok_y, g.dy());
      }
      density(i, j) = dot(s, cross(dsx, dsy));
    }
  }
  return density;
}

double TopologyReport::integer_deviation() const { return std::abs(n_skyr - std::round(n_skyr)); }

TopologyReport skyrmion_number(const UnitStokesField& u, double window_radius, const TopologyOptions& options) {
  const auto& g = u.grid();
  if (!(window_radius > 0.0) || window_radius > g.extent()) {
    throw ParameterError("window radius must lie in (0, grid extent]");
  }

  TopologyReport report{.grid = g, .density = skyrmion_density(u), .warnings = {}};
  report.window_radius = window_radius;

  // Largest centred disk whose rim interpolation stencil stays on the support
  // and on the grid.
  const double h = std::max(g.dx(), g.dy());
  double first_hole = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < g.ny(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (!u.mask(i, j)) {
        first_hole = std::min(first_hole, std::hypot(g.x(i), g.y(j)));
      }
    }
  }
  const double grid_limit = g.extent() - 0.5 * h - 1e-12 * g.extent();
  const double radius = std::min({window_radius, grid_limit, first_hole - 1.5 * h});
  if (!(radius > 2.0 * h)) {
    throw EmptySupportError("support mask leaves no usable integration disk around the axis");
  }
  report.integration_radius = radius;
  if (radius < window_radius * (1.0 - 1e-9)) {
    std::ostringstream msg;
    msg << "window: integration radius reduced from " << window_radius << " to " << radius
        << " by support mask or grid edge";
    report.warnings.push_back(msg.str());
  }

  std::vector<double> terms;
  terms.reserve(g.size());
  const double r2max = radius * radius;
  for (std::size_t j = 0; j < g.ny(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      const double x = g.x(i);
      const double y = g.y(j);
      if (x * x + y * y <= r2max && u.mask(i, j)) {
        terms.push_back(report.density(i, j));
      }
    }
  }
  const double integral = compensated_sum(terms) * g.cell_area();
  const double four_pi = 4.0 * std::numbers::pi;
  report.n_open = integral / four_pi;

  // Rim, counter-clockwise, about four points per grid step of arc.
  const auto count = std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil(8.0 * std::numbers::pi * radius / h)));
  std::vector<Vec3> rim(count);
  double mean_z = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
    rim[k] = interpolate_unit(u, radius * std::cos(theta), radius * std::sin(theta));
    mean_z += rim[k][2];
  }
  const int pole_sign = mean_z >= 0.0 ? 1 : -1;
  const Vec3 pole{0.0, 0.0, static_cast<double>(pole_sign)};
  double deviation = 0.0;
  for (const auto& s : rim) {
    deviation = std::max(deviation, std::acos(std::clamp(dot(s, pole), -1.0, 1.0)));
  }
  report.boundary_pole_deviation = deviation;

  std::vector<double> caps(count);
  for (std::size_t k = 0; k < count; ++k) {
    // Exterior triangle (next, current, pole) keeps the orientation of the
    // interior for a counter-clockwise rim.
    caps[k] = solid_angle(rim[(k + 1) % count], rim[k], pole);
  }
  report.rim_solid_angle = compensated_sum(caps);

  if (options.close_boundary) {
    report.closure_pole = pole_sign;
    report.n_skyr = (integral + report.rim_solid_angle) / four_pi;
  } else {
    report.n_skyr = report.n_open;
  }

  if (deviation > options.boundary_warning_rad) {
    std::ostringstream msg;
    msg << "unreliable-boundary: rim deviates " << deviation << " rad from the "
        << (pole_sign > 0 ? "north" : "south") << " pole (limit " << options.boundary_warning_rad << ")";
    report.warnings.push_back(msg.str());
  }
  return report;
}

double region_charge(const UnitStokesField& u, const RealField& density,
                     const std::function<bool(double, double)>& inside) {
  const auto& g = u.grid();
  require_same_grid(g, density.grid(), "region_charge");
  std::vector<double> terms;
  for (std::size_t j = 0; j < g.ny(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (u.mask(i, j) && inside(g.x(i), g.y(j))) {
        terms.push_back(density(i, j));
      }
    }
  }
  return compensated_sum(terms) * g.cell_area() / (4.0 * std::numbers::pi);
}

double concurrence(const StokesField& field) {
  const StokesTotals t = integrate_stokes(field);
  if (!(t.s0 > 0.0)) {
    throw ParameterError("concurrence needs positive total power");
  }
  const double polarisation = (t.s1 * t.s1 + t.s2 * t.s2 + t.s3 * t.s3) / (t.s0 * t.s0);
  return std::sqrt(std::clamp(1.0 - polarisation, 0.0, 1.0));
}

double concurrence(const VectorBeam& beam) { return concurrence(stokes_from_beam(beam)); }

nlohmann::json to_json(const TopologyReport& report) {
  return {
      {"n_skyr", report.n_skyr},
      {"n_open", report.n_open},
      {"window_radius", report.window_radius},
      {"integration_radius", report.integration_radius},
      {"boundary_pole_deviation", report.boundary_pole_deviation},
      {"closure_pole", report.closure_pole},
      {"rim_solid_angle", report.rim_solid_angle},
      {"grid", {{"nx", report.grid.nx()}, {"ny", report.grid.ny()}, {"extent", report.grid.extent()}}},
      {"warnings", report.warnings},
  };
}

}  // namespace skyrmem
