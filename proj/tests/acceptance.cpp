// Acceptance checks, one line per criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "skyrmem/defaults.hpp"
#include "skyrmem/dualpath.hpp"
#include "skyrmem/eit_memory.hpp"
#include "skyrmem/scenario.hpp"
#include "skyrmem/stokes.hpp"
#include "skyrmem/tomography.hpp"
#include "skyrmem/topology.hpp"

using namespace skyrmem;
using nlohmann::json;

namespace {

constexpr double kQuantTol = 0.02;
constexpr double kCaseSeconds = 5.0;
constexpr double kChannelTol = 0.02;
constexpr double kConcurrenceTol = 1e-4;
constexpr double kFitR2 = 0.999;
constexpr double kFlatTol = 0.02;
constexpr double kDelayTol = 0.05;
constexpr double kPowerNTol = 0.05;
constexpr double kVariationMin = 0.10;
constexpr double kClosureTol = 1e-12;
constexpr double kTomoTol = 0.05;
constexpr int kTomoSeeds = 100;
constexpr double kDensityRms = 1e-4;
constexpr double kPassivityTol = 1e-3;

std::vector<double> g_balances;  // every storage simulation run below

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double n_of(const VectorBeam& b, double window = 5.0) {
  return skyrmion_number(normalize_stokes(stokes_from_beam(b), kSyntheticSupportThreshold), window).n_skyr;
}

void record_balances(const json& results) {
  for (const auto& p : results["points"]) {
    for (const char* ch : {"ch1", "ch2"}) g_balances.push_back(p[ch]["energy_balance"].get<double>());
  }
}

Outcome quantization() {
  const auto g = TransverseGrid::square(512, 6.0);
  double worst = 0.0;
  double slowest = 0.0;
  for (int l : {1, 2, 3}) {
    const auto t0 = std::chrono::steady_clock::now();
    const double n = n_of(make_skyrmion_state(g, l, 1.0, 1.0, 0.0));
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    worst = std::max(worst, std::abs(n - l));
  }
  return {worst < kQuantTol && slowest < kCaseSeconds,
          fmt("max |N-l| = %.2e (tol %.2f), slowest case %.2f s (limit %.0f s)", worst, kQuantTol, slowest,
              kCaseSeconds)};
}

Outcome convergence() {
  bool ok = true;
  std::string detail;
  for (int l : {1, 2, 3}) {
    std::vector<double> err;
    for (std::size_t n : {128, 256, 512}) {
      err.push_back(std::abs(n_of(make_skyrmion_state(TransverseGrid::square(n, 6.0), l, 1.0, 1.0, 0.0)) - l));
    }
    ok &= err[1] < err[0] && err[2] < err[1];
    detail += fmt("l=%d: %.1e > %.1e > %.1e; ", l, err[0], err[1], err[2]);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome channel_invariance() {
  const auto g = TransverseGrid::square(256, 6.0);
  const std::vector<double> etas{0.05, 0.1, 0.25, 0.5, 0.75, 1.0};
  double worst_n = 0.0;
  double worst_c = 0.0;
  int cases = 0;
  for (int l : {1, 2, 3}) {
    const auto beam = make_skyrmion_state(g, l, 1.0, 1.0, 0.0);
    const double n_in = n_of(beam);
    const auto [ch1, ch2] = decompose(beam);
    for (double e1 : etas) {
      for (double e2 : etas) {
        for (int k = 0; k <= 8; ++k) {
          ChannelSpec spec;
          spec.eta1 = e1;
          spec.eta2 = e2;
          spec.phi = k * std::numbers::pi / 4.0;
          const auto out = recombine(apply_channel(ch1, spec, 0), apply_channel(ch2, spec, l));
          worst_n = std::max(worst_n, std::abs(n_of(out) - n_in));
          worst_c = std::max(worst_c, std::abs(concurrence(out) - 2.0 * std::sqrt(e1 * e2) / (e1 + e2)));
          ++cases;
        }
      }
    }
  }
  return {worst_n < kChannelTol && worst_c < kConcurrenceTol,
          fmt("%d channels, l=1..3 at 256^2: max |dN| = %.2e (tol %.2f), max concurrence error %.1e (tol %.0e)", cases,
              worst_n, kChannelTol, worst_c, kConcurrenceTol)};
}

json storage_doc(const char* scenario) {
  json doc{{"scenario", scenario},
           {"seed", 1},
           {"beam", {{"l", {1, 2}}}},
           {"medium", {{"optical_depth", 100}}},
           {"control", {{"power_mw", defaults::kControlPowerMw}}},
           {"probe", {{"width_us", 0.5}}}};
  return doc;
}

Outcome storage_time() {
  auto doc = storage_doc("store_sweep_time");
  doc["medium"]["efficiency_halving_us"] = 1.0;
  doc["sweep"] = {{"storage_times_us", {0.5, 1.5, 2.5}}};
  const auto r = run_scenario(parse_config(doc));
  record_balances(r.results);
  const double expected = 2.0 * defaults::kHalvingGammaS;
  double min_r2 = 1.0;
  double worst_rate = 0.0;
  double worst_flat = 0.0;
  for (const auto& fit : r.results["fits"]) {
    for (const char* ch : {"ch1", "ch2"}) {
      if (fit[ch].is_null()) return {false, "no fit for " + std::string(ch)};
      min_r2 = std::min(min_r2, fit[ch]["r_squared"].get<double>());
      worst_rate = std::max(worst_rate, std::abs(fit[ch]["rate_per_s"].get<double>() / expected - 1.0));
    }
  }
  for (const auto& p : r.results["points"]) {
    if (!p["n_out"].is_number()) return {false, "a path died during the sweep"};
    worst_flat = std::max(worst_flat, std::abs(p["n_out"].get<double>() - p["point"]["l"].get<double>()));
  }
  return {min_r2 > kFitR2 && worst_flat < kFlatTol,
          fmt("min R^2 = %.6f (> %.3f), fitted rate within %.1e of 2 gamma_s, max |N_out-l| = %.2e (tol %.2f)", min_r2,
              kFitR2, worst_rate, worst_flat, kFlatTol)};
}

SimulatedSource default_source() {
  SimulatedSource s;
  const double width = defaults::kPulseWidth;
  const double center = defaults::kPulseCenterWidths * width;
  const double rabi = defaults::rabi_from_power(defaults::kControlPowerMw);
  s.control = ControlSchedule::storage(rabi, center + defaults::kControlOffDelayWidths * width, 0.5e-6,
                                       defaults::kRamp);
  s.probe = {.peak_rabi = defaults::kProbeFraction * rabi, .width = width, .center_time = center};
  s.storage_time = 0.5e-6;
  return s;
}

Outcome mode_ordering() {
  const auto s = default_source();
  std::vector<double> eff;
  for (int l = 0; l <= 3; ++l) {
    const auto r = simulate_storage(s.medium, s.control, s.probe, l, s.storage_time);
    g_balances.push_back(energy_balance(r));
    eff.push_back(r.efficiency);
  }
  const bool ok = eff[0] > eff[1] && eff[1] > eff[2] && eff[2] > eff[3];
  return {ok, fmt("efficiency l=0..3: %.4f > %.4f > %.4f > %.4f", eff[0], eff[1], eff[2], eff[3])};
}

Outcome slow_light() {
  const double gamma = defaults::kLinewidth;
  MediumParams m;
  m.optical_depth = 100;
  const double fwhm = 600.0 / gamma;
  const ProbePulse probe{.peak_rabi = 0.01 * gamma, .width = fwhm, .center_time = 3.0 * fwhm};
  const auto r = simulate_storage(m, ControlSchedule::always_on(gamma), probe, 0, 0.0, {.time_step = 0.09, .end_time = {}});
  g_balances.push_back(energy_balance(r));
  const double expected = 100.0 / gamma;
  const double rel = std::abs(group_delay(r) / expected - 1.0);
  return {rel < kDelayTol, fmt("delay %.4f us vs D Gamma/Omega_c^2 = %.4f us, relative error %.2e (tol %.2f)",
                               group_delay(r) * 1e6, expected * 1e6, rel, kDelayTol)};
}

Outcome power_robustness() {
  auto doc = storage_doc("store_sweep_power");
  doc["sweep"] = {{"storage_time_us", 0.5}, {"powers_mw", {6, 10, 18, 33, 45, 53, 75}}};
  const auto cfg = parse_config(doc);
  const auto r = run_scenario(cfg);
  record_balances(r.results);
  const double lo = std::sqrt(6.0 / 33.0);
  const double hi = std::sqrt(75.0 / 33.0);
  double worst_n = 0.0;
  double min_change = 1.0;
  for (const auto& v : r.results["variation"]) {
    if (!v["max_abs_delta_n"].is_number()) return {false, "a path died during the sweep"};
    worst_n = std::max(worst_n, v["max_abs_delta_n"].get<double>());
    const double change = std::max({v["relative_change_eff_ch1"].get<double>(),
                                    v["relative_change_eff_ch2"].get<double>(),
                                    v["relative_change_imbalance"].get<double>()});
    min_change = std::min(min_change, change);
  }
  const bool span_ok = hi - lo > 1.0;
  return {span_ok && worst_n < kPowerNTol && min_change > kVariationMin,
          fmt("Omega_c from %.2f to %.2f of default, max |dN| = %.2e (tol %.2f), efficiency change >= %.0f%% (min "
              "%.0f%%)",
              lo, hi, worst_n, kPowerNTol, 100.0 * min_change, 100.0 * kVariationMin)};
}

Outcome tomography() {
  const auto g = TransverseGrid::square(256, 6.0);
  double closure = 0.0;
  for (int l : {1, 2, 3}) {
    const auto b = make_skyrmion_state(g, l, 1.0, 1.0, 0.0);
    const auto truth = stokes_from_beam(b);
    const auto rec = reconstruct_stokes_field(project_intensity(b), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
      closure = std::max({closure, std::abs(rec.s0[k] - truth.s0[k]), std::abs(rec.s1[k] - truth.s1[k]),
                          std::abs(rec.s2[k] - truth.s2[k]), std::abs(rec.s3[k] - truth.s3[k])});
    }
  }
  const json doc{{"scenario", "tomography_noise"},
                 {"seed", 1000},
                 {"beam", {{"l", {1, 2, 3}}}},
                 {"tomography", {{"shot_scale", 1e4}, {"read_sigma_fraction", 0.01}, {"seeds", kTomoSeeds}}}};
  const auto r = run_scenario(parse_config(doc));
  double worst = 0.0;
  std::size_t samples = 0;
  for (const auto& s : r.results["statistics"]) {
    worst = std::max(worst, s["max_abs_error"].get<double>());
    samples += s["samples"].get<std::size_t>();
  }
  return {closure < kClosureTol && worst < kTomoTol && samples >= 3 * kTomoSeeds,
          fmt("noiseless closure %.1e (tol %.0e); %zu noisy reconstructions, max |N-l| = %.3f (tol %.2f)", closure,
              kClosureTol, samples, worst, kTomoTol)};
}

Outcome derivative_check() {
  const auto g = TransverseGrid::square(512, 6.0);
  const auto u = normalize_stokes(stokes_from_beam(make_skyrmion_state(g, 1, 1.0, 1.0, 0.0)), kSyntheticSupportThreshold);
  const auto d = skyrmion_density(u);
  double sum2 = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < g.ny(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      const double r2 = g.x(i) * g.x(i) + g.y(j) * g.y(j);
      if (r2 > 25.0) continue;
      const double q = 1.0 + 2.0 * r2;
      const double e = d(i, j) - 8.0 / (q * q);
      sum2 += e * e;
      ++n;
    }
  }
  const double rms = std::sqrt(sum2 / static_cast<double>(n));
  return {rms < kDensityRms, fmt("RMS density error %.2e over r <= 5 at 512^2 (tol %.0e)", rms, kDensityRms)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome passivity_determinism() {
  // Extra storage runs over depth, control and decoherence.
  const double gamma = defaults::kLinewidth;
  for (double depth : {10.0, 100.0, 300.0}) {
    for (double oc : {0.3, 1.0, 2.0}) {
      for (double gs : {0.0, 2e-3}) {
        MediumParams m;
        m.optical_depth = depth;
        m.gamma_s = gs * gamma;
        const double fwhm = 40.0 / gamma;
        const auto control = ControlSchedule::storage(oc * gamma, 3.0 * fwhm + 60.0 / gamma, 20.0 / gamma, 5.0 / gamma);
        const ProbePulse probe{.peak_rabi = 0.01 * oc * gamma, .width = fwhm, .center_time = 3.0 * fwhm};
        const SolverSettings settings{.time_step = std::min(defaults::kTimeStep, max_stable_time_step(m, depth, oc * gamma)),
                                      .end_time = {}};
        g_balances.push_back(energy_balance(simulate_storage(m, control, probe, 0, 20.0 / gamma, settings)));
      }
    }
  }
  double worst = 0.0;
  for (double b : g_balances) worst = std::max(worst, b - 1.0);

  // Byte-identical files from two runs with different thread counts.
  const auto base = std::filesystem::temp_directory_path() / "skyrmem_acceptance";
  std::filesystem::remove_all(base);
  auto time_doc = storage_doc("store_sweep_time");
  time_doc["beam"]["grid_samples"] = 128;
  time_doc["medium"]["efficiency_halving_us"] = 1.0;
  time_doc["sweep"] = {{"storage_times_us", {0.5, 1.5}}};
  const json tomo_doc{{"scenario", "tomography_noise"},
                      {"seed", 7},
                      {"beam", {{"l", {1, 2}}, {"grid_samples", 128}}},
                      {"tomography", {{"background", 200}, {"background_estimate_fractions", {1.0, 0.5}}, {"seeds", 10}}}};
  bool identical = true;
  for (const auto& [name, doc] : {std::pair{"time", time_doc}, std::pair{"tomo", tomo_doc}}) {
    auto cfg = parse_config(doc);
    std::vector<std::string> bytes;
    for (unsigned threads : {1u, 4u}) {
      cfg.output.dir = base / (std::string(name) + std::to_string(threads));
      run_and_write(cfg, {.threads = threads});
      bytes.push_back(slurp(cfg.output.dir / "results.json") + slurp(cfg.output.dir / "sweep.csv"));
    }
    identical &= bytes[0] == bytes[1] && !bytes[0].empty();
  }
  std::filesystem::remove_all(base);
  return {worst <= kPassivityTol && identical,
          fmt("%zu storage runs, max (eta + leak) - 1 = %.1e (tol %.0e); reruns byte-identical: %s", g_balances.size(),
              worst, kPassivityTol, identical ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"quantization", quantization},
      {"grid-convergence", convergence},
      {"diagonal-channel-invariance", channel_invariance},
      {"storage-time-decay", storage_time},
      {"mode-order-efficiency", mode_ordering},
      {"slow-light-delay", slow_light},
      {"control-power-robustness", power_robustness},
      {"tomography", tomography},
      {"density-derivative", derivative_check},
      {"passivity-determinism", passivity_determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("[%s] %2zu %-28s %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
