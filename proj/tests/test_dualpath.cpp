#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "skyrmem/defaults.hpp"
#include "skyrmem/dualpath.hpp"
#include "skyrmem/stokes.hpp"

using namespace skyrmem;

namespace {

const TransverseGrid kGrid = TransverseGrid::square(128, 6.0);

double n_of(const VectorBeam& b) {
  return skyrmion_number(normalize_stokes(stokes_from_beam(b), kSyntheticSupportThreshold), 5.0).n_skyr;
}

// A heavy sigma- component squeezes the core, so the transmission sweep
// needs the finer grid.
double n_fine(int l, const ChannelSpec& spec) {
  static const auto fine = TransverseGrid::square(256, 6.0);
  auto [ch1, ch2] = decompose(make_skyrmion_state(fine, l, 1.0, 1.0, 0.0));
  return n_of(recombine(apply_channel(ch1, spec, 0), apply_channel(ch2, spec, l)));
}

double max_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

VectorBeam strip_meta(const VectorBeam& b) { return VectorBeam(b.sigma_plus, b.sigma_minus); }

SimulatedSource default_source(double storage_time_us = 0.5) {
  SimulatedSource s;
  const double width = defaults::kPulseWidth;
  const double center = defaults::kPulseCenterWidths * width;
  const double rabi = defaults::rabi_from_power(defaults::kControlPowerMw);
  s.control = ControlSchedule::storage(rabi, center + defaults::kControlOffDelayWidths * width,
                                       storage_time_us * 1e-6, defaults::kRamp);
  s.probe = {.peak_rabi = defaults::kProbeFraction * rabi, .width = width, .center_time = center};
  s.storage_time = storage_time_us * 1e-6;
  return s;
}

}  // namespace

TEST_CASE("decompose: equal weights split the power in half") {
  const auto b = make_skyrmion_state(kGrid, 2, 1.0, 1.0, 0.0);
  const auto [ch1, ch2] = decompose(b);
  CHECK(ch1.label == PathLabel::Ch1);
  CHECK(ch2.label == PathLabel::Ch2);
  CHECK(ch1.l == 0);
  CHECK(ch2.l == 2);
  CHECK(std::norm(ch1.amp) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::norm(ch2.amp) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("decompose: pure sigma+ Gaussian leaves ch2 empty") {
  const VectorBeam b(unit_lg_mode(kGrid, 0, 0, 1.0), ScalarField(kGrid));
  const auto [ch1, ch2] = decompose(b);
  CHECK(std::abs(ch2.amp) < 1e-15);
  CHECK(std::norm(ch1.amp) == doctest::Approx(1.0));
}

TEST_CASE("decompose without metadata projects onto the basis") {
  const auto b = make_skyrmion_state(kGrid, -3, 1.0, 0.7, 1.1);
  const auto [ch1, ch2] = decompose(strip_meta(b));
  CHECK(ch2.l == -3);
  CHECK(std::norm(ch1.amp) + std::norm(ch2.amp) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::arg(ch2.amp / ch1.amp) == doctest::Approx(1.1));

  // A radial LG^1_1 admixture lies outside the two-mode basis.
  auto minus = scaled(unit_lg_mode(kGrid, 1, 1, 1.0), std::sqrt(0.5));
  const VectorBeam odd(scaled(unit_lg_mode(kGrid, 0, 0, 1.0), std::sqrt(0.5)), std::move(minus));
  CHECK_THROWS_AS(decompose(odd), NonBasisBeamError);
}

TEST_CASE("identity channel round trip restores the beam") {
  for (int l : {1, 2, -2, 3}) {
    CAPTURE(l);
    const auto b = make_skyrmion_state(kGrid, l, 1.0, 1.4, 0.6);
    auto [ch1, ch2] = decompose(b);
    const auto spec = ChannelSpec::identity();
    const auto out = recombine(apply_channel(ch1, spec, 0), apply_channel(ch2, spec, l));
    CHECK(max_diff(out.sigma_plus, b.sigma_plus) < 1e-12);
    CHECK(max_diff(out.sigma_minus, b.sigma_minus) < 1e-12);
    CHECK(std::abs(n_of(out) - n_of(b)) < 1e-9);
  }
}

TEST_CASE("analytic channel scales by sqrt(eta) and rotates ch2") {
  const auto b = make_skyrmion_state(kGrid, 1, 1.0, 1.0, 0.0);
  auto [ch1, ch2] = decompose(b);
  ChannelSpec spec;
  spec.eta1 = 0.25;
  spec.eta2 = 0.64;
  spec.phi = 0.9;
  const auto a1 = apply_channel(ch1, spec, 0);
  const auto a2 = apply_channel(ch2, spec, 1);
  CHECK(std::abs(a1.amp) == doctest::Approx(0.5 * std::abs(ch1.amp)));
  CHECK(std::abs(a2.amp) == doctest::Approx(0.8 * std::abs(ch2.amp)));
  CHECK(std::arg(a1.amp / ch1.amp) == doctest::Approx(0.0));
  CHECK(std::arg(a2.amp / ch2.amp) == doctest::Approx(0.9));
  CHECK(std::abs(a1.amp) <= 1.0);

  spec.eta1 = 1.2;
  CHECK_THROWS_AS(apply_channel(ch1, spec, 0), ParameterError);
}

TEST_CASE("imbalanced loss keeps N and sets the concurrence") {
  const auto b = make_skyrmion_state(kGrid, 2, 1.0, 1.0, 0.0);
  auto [ch1, ch2] = decompose(b);
  ChannelSpec spec;
  spec.eta1 = 0.8;
  spec.eta2 = 0.2;
  spec.phi = 1.0;
  const auto out = recombine(apply_channel(ch1, spec, 0), apply_channel(ch2, spec, 2));
  CHECK(std::abs(n_of(out) - 2.0) < 0.02);
  CHECK(concurrence(out) == doctest::Approx(0.8).epsilon(1e-10));
  CHECK(total_power(out) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("property: diagonal channels preserve N over a transmission grid") {
  const auto b = make_skyrmion_state(kGrid, 1, 1.0, 1.0, 0.0);
  auto [ch1, ch2] = decompose(b);
  for (double e1 : {0.05, 0.3, 1.0}) {
    for (double e2 : {0.05, 0.5, 1.0}) {
      for (double phi : {0.0, 2.0, 4.5}) {
        ChannelSpec spec;
        spec.eta1 = e1;
        spec.eta2 = e2;
        spec.phi = phi;
        const auto out = recombine(apply_channel(ch1, spec, 0), apply_channel(ch2, spec, 1));
        CAPTURE(e1);
        CAPTURE(e2);
        CHECK(std::abs(n_fine(1, spec) - 1.0) < 0.02);
        CHECK(concurrence(out) == doctest::Approx(2 * std::sqrt(e1 * e2) / (e1 + e2)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("a fully lost path collapses the texture") {
  const auto b = make_skyrmion_state(kGrid, 2, 1.0, 1.0, 0.0);
  auto [ch1, ch2] = decompose(b);
  ChannelSpec spec;
  spec.eta2 = 0.0;
  const auto dead = apply_channel(ch2, spec, 2);
  CHECK(dead.dead);
  CHECK(dead.amp == Complex(0.0, 0.0));
  const auto out = recombine(apply_channel(ch1, spec, 0), dead);
  CHECK(std::abs(n_of(out)) < 1e-9);
  CHECK(concurrence(out) == doctest::Approx(0.0));
}

TEST_CASE("recombine requires a shared grid") {
  const auto a = decompose(make_skyrmion_state(kGrid, 1, 1.0, 1.0, 0.0)).first;
  const auto other = TransverseGrid::square(64, 6.0);
  const auto b = decompose(make_skyrmion_state(other, 1, 1.0, 1.0, 0.0)).second;
  CHECK_THROWS_AS(recombine(a, b), ParameterError);
}

TEST_CASE("simulated channel: the higher-order path stores less") {
  const auto b = make_skyrmion_state(kGrid, 2, 1.0, 1.0, 0.0);
  auto [ch1, ch2] = decompose(b);
  ChannelSpec spec;
  spec.simulated = default_source();
  const auto s1 = apply_channel(ch1, spec, 0);
  const auto s2 = apply_channel(ch2, spec, 2);
  REQUIRE(s1.storage);
  REQUIRE(s2.storage);
  CHECK(std::abs(s1.amp) > std::abs(s2.amp));
  CHECK(std::abs(s1.amp) <= 1.0);
  CHECK(s2.storage->optical_depth == doctest::Approx(100.0 / 3.0));

  SUBCASE("equivalent analytic channel gives the same Stokes field") {
    ChannelSpec analytic;
    analytic.eta1 = s1.storage->efficiency;
    analytic.eta2 = s2.storage->efficiency;
    // Analytic channels carry no per-path phase, so start from paths whose
    // retrieval phases are already applied.
    auto p1 = ch1;
    auto p2 = ch2;
    p1.amp *= std::polar(1.0, s1.storage->retrieval_phase);
    p2.amp *= std::polar(1.0, s2.storage->retrieval_phase);
    const auto sim = stokes_from_beam(recombine(s1, s2));
    const auto ana = stokes_from_beam(recombine(apply_channel(p1, analytic, 0), apply_channel(p2, analytic, 2)));
    double sum2 = 0.0;
    for (std::size_t k = 0; k < kGrid.size(); ++k) {
      for (auto f : {&StokesField::s0, &StokesField::s1, &StokesField::s2, &StokesField::s3}) {
        const double d = (sim.*f)[k] - (ana.*f)[k];
        sum2 += d * d;
      }
    }
    CHECK(std::sqrt(sum2 / (4.0 * kGrid.size())) < 1e-6);
  }
}

TEST_CASE("dead simulated path is flagged, not thrown") {
  PathState p = decompose(make_skyrmion_state(kGrid, 1, 1.0, 1.0, 0.0)).second;
  const PathOutcome failed{.l = 1, .optical_depth = 50, .efficiency = 0.0, .retrieval_phase = 0.0,
                           .leakage = 0.3, .energy_balance = 0.3, .dead = true};
  const auto out = apply_outcome(p, failed, 0.5);
  CHECK(out.dead);
  CHECK(out.amp == Complex(0.0, 0.0));
}

TEST_CASE("full storage experiment keeps the skyrmion number") {
  const auto src = default_source();
  ExperimentOptions opt;
  opt.grid_samples = 128;
  const auto rec = run_storage_experiment(1, 0.5e-6, src.medium, src.control, src.probe, opt);
  CHECK(std::abs(rec.n_in() - 1.0) < 0.02);
  CHECK(std::abs(rec.n_out() - 1.0) < 0.02);
  CHECK(rec.ch1.outcome.efficiency > rec.ch2.outcome.efficiency);
  CHECK(rec.ch1.outcome.energy_balance <= 1.0 + 1e-3);
  CHECK(rec.ch2.outcome.energy_balance <= 1.0 + 1e-3);
  const double e1 = rec.ch1.outcome.efficiency;
  const double e2 = rec.ch2.outcome.efficiency;
  CHECK(rec.concurrence_out == doctest::Approx(2 * std::sqrt(e1 * e2) / (e1 + e2)).epsilon(1e-6));
  CHECK(rec.imbalance() == doctest::Approx(e2 / e1));

  const auto j = to_json(rec);
  for (const char* key : {"inputs", "ch1", "ch2", "n_in", "n_out", "concurrence_in", "concurrence_out"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["ch2"]["l"] == 1);
  // Reruns serialise identically.
  CHECK(to_json(run_storage_experiment(1, 0.5e-6, src.medium, src.control, src.probe, opt)).dump() == j.dump());
}
