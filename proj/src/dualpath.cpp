#include "skyrmem/dualpath.hpp"

#include <cmath>
#include <future>
#include <limits>

#include "skyrmem/stokes.hpp"

namespace skyrmem {

namespace {

nlohmann::json complex_json(Complex z) { return {z.real(), z.imag()}; }

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

ScalarField multiplied(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid(), b.grid(), "aberration mask");
  ScalarField out(a.grid());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] * b[k];
  return out;
}

TopologyReport topology_of(const VectorBeam& beam, double window_radius) {
  return skyrmion_number(normalize_stokes(stokes_from_beam(beam), kSyntheticSupportThreshold), window_radius);
}

PathOutcome outcome_from(const StorageResult& r, int l) {
  PathOutcome out;
  out.l = l;
  out.optical_depth = r.optical_depth;
  out.efficiency = r.efficiency;
  out.leakage = r.leakage;
  out.energy_balance = energy_balance(r);
  out.dead = !(r.efficiency > 0.0) || std::abs(r.retrieval_amp) == 0.0;
  out.retrieval_phase = out.dead ? 0.0 : retrieval_phase(r);
  return out;
}

}  // namespace

const char* to_string(PathLabel label) { return label == PathLabel::Ch1 ? "ch1" : "ch2"; }

void ChannelSpec::validate() const {
  for (double eta : {eta1, eta2}) {
    if (!(eta >= 0.0 && eta <= 1.0)) {
      throw ParameterError("channel transmission must lie in [0, 1]");
    }
  }
  if (!std::isfinite(phi)) {
    throw ParameterError("channel phase must be finite");
  }
}

std::pair<PathState, PathState> decompose(const VectorBeam& beam) {
  const auto& g = beam.grid();
  ScalarField mode1(g);
  ScalarField mode2(g);
  int l = 0;
  if (beam.meta) {
    l = beam.meta->l;
    mode1 = unit_lg_mode(g, 0, 0, beam.meta->waist_plus);
    mode2 = unit_lg_mode(g, 0, l, beam.meta->waist_minus);
  } else {
    mode1 = unit_lg_mode(g, 0, 0, 1.0);
    double best = -1.0;
    for (int order = -kMaxProjectedOrder; order <= kMaxProjectedOrder; ++order) {
      ScalarField candidate = unit_lg_mode(g, 0, order, 1.0);
      const double overlap = std::norm(inner_product(candidate, beam.sigma_minus));
      if (overlap > best * (1.0 + 1e-12)) {
        best = overlap;
        l = order;
        mode2 = std::move(candidate);
      }
    }
  }
  const Complex a1 = inner_product(mode1, beam.sigma_plus);
  const Complex a2 = inner_product(mode2, beam.sigma_minus);
  if (!beam.meta) {
    const double power = total_power(beam);
    const double residual = power - std::norm(a1) - std::norm(a2);
    if (power > 0.0 && residual > kNonBasisTolerance * power) {
      throw NonBasisBeamError("beam has " + std::to_string(residual / power) +
                              " of its power outside the LG^0_0 / LG^l_0 basis");
    }
  }
  PathState ch1{.mode = std::move(mode1), .label = PathLabel::Ch1, .amp = a1, .l = 0, .dead = false, .storage = {}};
  PathState ch2{.mode = std::move(mode2), .label = PathLabel::Ch2, .amp = a2, .l = l, .dead = false, .storage = {}};
  return {std::move(ch1), std::move(ch2)};
}

PathOutcome simulate_path(const SimulatedSource& source, int l) {
  return outcome_from(simulate_storage(source.medium, source.control, source.probe, l, source.storage_time, source.solver),
                      l);
}

PathState apply_outcome(PathState path, const PathOutcome& outcome, double extra_phase) {
  path.storage = outcome;
  if (outcome.dead) {
    path.amp = 0.0;
    path.dead = true;
    return path;
  }
  path.amp *= std::polar(std::sqrt(outcome.efficiency), outcome.retrieval_phase + extra_phase);
  return path;
}

PathState apply_channel(PathState path, const ChannelSpec& spec, int l_of_path) {
  spec.validate();
  if (spec.aberration) {
    path.mode = multiplied(path.mode, *spec.aberration);
  }
  const bool second = path.label == PathLabel::Ch2;
  const double extra_phase = second ? spec.phi : 0.0;
  if (spec.simulated) {
    return apply_outcome(std::move(path), simulate_path(*spec.simulated, std::abs(l_of_path)), extra_phase);
  }
  const double eta = second ? spec.eta2 : spec.eta1;
  path.amp *= std::polar(std::sqrt(eta), extra_phase);
  if (eta == 0.0) {
    path.dead = true;
  }
  return path;
}

VectorBeam recombine(const PathState& ch1, const PathState& ch2) {
  require_same_grid(ch1.mode.grid(), ch2.mode.grid(), "recombine");
  return VectorBeam(scaled(ch1.mode, ch1.amp), scaled(ch2.mode, ch2.amp));
}

double ExperimentRecord::n_out() const {
  return topology_out ? topology_out->n_skyr : std::numeric_limits<double>::quiet_NaN();
}

double ExperimentRecord::imbalance() const {
  if (ch1.outcome.dead || !(ch1.outcome.efficiency > 0.0)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return (ch2.outcome.dead ? 0.0 : ch2.outcome.efficiency) / ch1.outcome.efficiency;
}

ExperimentRecord run_storage_experiment(int l, double storage_time, const MediumParams& medium,
                                        const ControlSchedule& control, const ProbePulse& probe,
                                        const ExperimentOptions& options) {
  const auto grid = TransverseGrid::square(options.grid_samples, options.grid_extent);
  Diagnostics diag;
  VectorBeam input =
      make_skyrmion_state(grid, l, options.waist, options.weight_ratio, options.rel_phase, std::nullopt, &diag);

  ExperimentRecord rec{.l = l,
                       .storage_time = storage_time,
                       .medium = medium,
                       .control = control,
                       .probe = probe,
                       .options = options,
                       .ch1 = {},
                       .ch2 = {},
                       .topology_in = topology_of(input, options.window_radius),
                       .topology_out = {},
                       .concurrence_in = concurrence(input),
                       .concurrence_out = 0.0,
                       .warnings = diag.warnings,
                       .trace_ch1 = {},
                       .trace_ch2 = {},
                       .beam_in = {},
                       .beam_out = {}};

  auto [ch1, ch2] = decompose(input);
  rec.ch1.amp_in = ch1.amp;
  rec.ch2.amp_in = ch2.amp;

  auto run = [&](int order) { return simulate_storage(medium, control, probe, order, storage_time, options.solver); };
  auto future1 = std::async(std::launch::async, run, 0);
  auto future2 = std::async(std::launch::async, run, std::abs(ch2.l));
  const StorageResult r1 = future1.get();
  const StorageResult r2 = future2.get();

  rec.ch1.outcome = outcome_from(r1, 0);
  rec.ch2.outcome = outcome_from(r2, std::abs(ch2.l));

  ch1 = apply_outcome(std::move(ch1), rec.ch1.outcome, 0.0);
  ch2 = apply_outcome(std::move(ch2), rec.ch2.outcome, options.phi);
  rec.ch1.amp_out = ch1.amp;
  rec.ch2.amp_out = ch2.amp;
  VectorBeam output = recombine(ch1, ch2);

  if (ch1.dead && ch2.dead) {
    rec.warnings.push_back("both paths dead: no retrieved texture");
  } else {
    rec.topology_out = topology_of(output, options.window_radius);
    rec.concurrence_out = concurrence(output);
    for (const auto& w : rec.topology_out->warnings) rec.warnings.push_back("out " + w);
  }
  for (const auto* path : {&rec.ch1, &rec.ch2}) {
    if (path->outcome.dead) {
      rec.warnings.push_back(std::string("dead path l=") + std::to_string(path->outcome.l));
    }
  }

  if (options.keep_traces) {
    rec.trace_ch1 = r1;
    rec.trace_ch2 = r2;
  }
  if (options.keep_beams) {
    rec.beam_in = std::move(input);
    rec.beam_out = std::move(output);
  }
  return rec;
}

nlohmann::json to_json(const PathOutcome& outcome) {
  return {{"l", outcome.l},
          {"optical_depth", outcome.optical_depth},
          {"efficiency", outcome.efficiency},
          {"retrieval_phase", outcome.dead ? nlohmann::json(nullptr) : nlohmann::json(outcome.retrieval_phase)},
          {"leakage", outcome.leakage},
          {"energy_balance", outcome.energy_balance},
          {"dead", outcome.dead}};
}

nlohmann::json to_json(const ExperimentRecord& record) {
  auto path_json = [](const PathRecord& p) {
    nlohmann::json j = to_json(p.outcome);
    j["amp_in"] = complex_json(p.amp_in);
    j["amp_out"] = complex_json(p.amp_out);
    return j;
  };
  const auto& o = record.options;
  nlohmann::json j{
      {"inputs",
       {{"l", record.l},
        {"storage_time_s", record.storage_time},
        {"medium", to_json(record.medium)},
        {"control", to_json(record.control)},
        {"probe", to_json(record.probe)},
        {"beam",
         {{"grid_samples", o.grid_samples},
          {"grid_extent", o.grid_extent},
          {"window_radius", o.window_radius},
          {"waist", o.waist},
          {"weight_ratio", o.weight_ratio},
          {"rel_phase", o.rel_phase},
          {"phi", o.phi}}},
        {"time_step", o.solver.time_step}}},
      {"ch1", path_json(record.ch1)},
      {"ch2", path_json(record.ch2)},
      {"n_in", record.n_in()},
      {"n_out", number_or_null(record.n_out())},
      {"concurrence_in", record.concurrence_in},
      {"concurrence_out", record.concurrence_out},
      {"imbalance", number_or_null(record.imbalance())},
      {"topology_in", to_json(record.topology_in)},
      {"warnings", record.warnings},
  };
  j["topology_out"] = record.topology_out ? to_json(*record.topology_out) : nlohmann::json(nullptr);
  return j;
}

}  // namespace skyrmem
