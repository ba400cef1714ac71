#include "skyrmem/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace skyrmem {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Engine over a single (key, counter) stream.
class CounterEngine {
 public:
  using result_type = std::uint64_t;
  explicit CounterEngine(std::uint64_t key) : key_(key) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return splitmix(key_ ^ splitmix(counter_++)); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t image, std::uint64_t pixel) {
  return splitmix(splitmix(splitmix(seed) ^ image) ^ pixel);
}

double peak(const RealField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, v);
  return m;
}

}  // namespace

void NoiseModel::validate() const {
  if (!(shot_scale >= 0.0) || !(read_sigma >= 0.0) || !(background >= 0.0) || !std::isfinite(shot_scale) ||
      !std::isfinite(read_sigma) || !std::isfinite(background)) {
    throw ParameterError("noise model parameters must be finite and non-negative");
  }
}

ProjectionSet project_intensity(const VectorBeam& beam) {
  const auto& g = beam.grid();
  ProjectionSet ps(g);
  const double r2 = std::numbers::sqrt2;
  const Complex i{0.0, 1.0};
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Complex ep = beam.sigma_plus[k];
    const Complex em = beam.sigma_minus[k];
    const Complex eh = (ep + em) / r2;
    const Complex ev = i * (ep - em) / r2;
    ps.h[k] = std::norm(eh);
    ps.v[k] = std::norm(ev);
    ps.d[k] = std::norm(eh + ev) / 2.0;
    ps.a[k] = std::norm(eh - ev) / 2.0;
    ps.r[k] = std::norm(ep);
    ps.l[k] = std::norm(em);
  }
  return ps;
}

ProjectionSet add_camera_noise(const ProjectionSet& ps, const NoiseModel& nm) {
  nm.validate();
  ProjectionSet out = ps;
  double gain = 1.0;
  if (nm.shot_scale > 0.0) {
    RealField s0(ps.grid());
    for (std::size_t k = 0; k < s0.size(); ++k) s0[k] = ps.h[k] + ps.v[k];
    const double top = peak(s0);
    if (!(top > 0.0)) {
      throw EmptySupportError("cannot scale shot noise on a dark image set");
    }
    gain = nm.shot_scale / top;
    out.counts_per_unit = ps.counts_per_unit * gain;
  }
  const auto src = ps.images();
  auto dst = out.images();
  for (std::size_t img = 0; img < dst.size(); ++img) {
    const RealField& in = *src[img];
    RealField& o = *dst[img];
    for (std::size_t k = 0; k < in.size(); ++k) {
      CounterEngine engine(stream_key(nm.seed, img, k));
      double value = in[k] * gain;
      if (nm.shot_scale > 0.0) {
        std::poisson_distribution<long long> shot(std::max(value, 0.0));
        value = value > 0.0 ? static_cast<double>(shot(engine)) : 0.0;
      }
      if (nm.read_sigma > 0.0) {
        std::normal_distribution<double> read(0.0, nm.read_sigma);
        value += read(engine);
      }
      o[k] = std::max(0.0, value + nm.background);
    }
  }
  return out;
}

Reconstruction reconstruct_stokes(const ProjectionSet& ps, double background_estimate) {
  if (!(ps.counts_per_unit > 0.0)) {
    throw ParameterError("projection set needs counts_per_unit > 0");
  }
  if (!(background_estimate >= 0.0)) {
    throw ParameterError("background estimate must be non-negative");
  }
  const auto& g = ps.grid();
  for (const RealField* img : ps.images()) {
    require_same_grid(g, img->grid(), "reconstruct_stokes");
  }
  auto level = [&](const RealField& img, std::size_t k) {
    return std::max(0.0, img[k] - background_estimate) / ps.counts_per_unit;
  };

  Reconstruction rec{.stokes = StokesField(g), .consistency_residual = 0.0, .warnings = {}};
  RealField s0_diag(g);
  RealField s0_circ(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double h = level(ps.h, k), v = level(ps.v, k);
    const double d = level(ps.d, k), a = level(ps.a, k);
    const double r = level(ps.r, k), l = level(ps.l, k);
    rec.stokes.s0[k] = h + v;
    rec.stokes.s1[k] = h - v;
    rec.stokes.s2[k] = d - a;
    rec.stokes.s3[k] = r - l;
    s0_diag[k] = d + a;
    s0_circ[k] = r + l;
  }

  const double top = peak(rec.stokes.s0);
  std::vector<double> spread;
  std::vector<double> power;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double s0 = rec.stokes.s0[k];
    if (top > 0.0 && s0 >= kNoisySupportThreshold * top) {
      const double hi = std::max({s0, s0_diag[k], s0_circ[k]});
      const double lo = std::min({s0, s0_diag[k], s0_circ[k]});
      spread.push_back((hi - lo) * (hi - lo));
      power.push_back(s0 * s0);
    }
  }
  if (!power.empty()) {
    rec.consistency_residual = std::sqrt(compensated_sum(spread) / compensated_sum(power));
  }
  if (rec.consistency_residual > kCalibrationTolerance) {
    std::ostringstream msg;
    msg << "calibration: S0 estimates disagree by " << rec.consistency_residual << " of S0 (limit "
        << kCalibrationTolerance << ")";
    rec.warnings.push_back(msg.str());
  }
  return rec;
}

StokesField reconstruct_stokes_field(const ProjectionSet& ps, double background_estimate) {
  return reconstruct_stokes(ps, background_estimate).stokes;
}

}  // namespace skyrmem
