#include "skyrmem/scenario.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "skyrmem/defaults.hpp"
#include "skyrmem/field_io.hpp"
#include "skyrmem/stokes.hpp"

namespace skyrmem {

namespace {

using nlohmann::json;

std::string join_path(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

// Walks one JSON object, remembering which keys were read so that anything
// left over can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) {
      throw ConfigError(path_, "expected an object");
    }
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  double number(const std::string& key, double fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    return as_number(*v, join_path(path_, key));
  }

  std::optional<double> optional_number(const std::string& key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    return as_number(*v, join_path(path_, key));
  }

  long long integer(const std::string& key, long long fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    return as_integer(*v, join_path(path_, key));
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(join_path(path_, key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(join_path(path_, key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    const std::string p = join_path(path_, key);
    if (!v->is_array() || v->empty()) throw ConfigError(p, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < v->size(); ++k) {
      out.push_back(as_number((*v)[k], p + "[" + std::to_string(k) + "]"));
    }
    return out;
  }

  std::vector<int> integers(const std::string& key, const std::vector<int>& fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    const std::string p = join_path(path_, key);
    if (v->is_number_integer()) return {static_cast<int>(v->get<long long>())};
    if (!v->is_array() || v->empty()) throw ConfigError(p, "expected an integer or a non-empty array of integers");
    std::vector<int> out;
    for (std::size_t k = 0; k < v->size(); ++k) {
      out.push_back(static_cast<int>(as_integer((*v)[k], p + "[" + std::to_string(k) + "]")));
    }
    return out;
  }

  // Missing child objects read as empty, so every key takes its default.
  ObjectReader child(const std::string& key) {
    const json* v = take(key);
    return ObjectReader(v ? *v : empty(), join_path(path_, key));
  }

  void finish() const {
    for (const auto& [key, value] : object_.items()) {
      if (!used_.contains(key)) {
        throw ConfigError(join_path(path_, key), "unknown key");
      }
    }
  }

  const std::string& path() const { return path_; }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }

  const json* take(const std::string& key) {
    used_.insert(key);
    auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  static double as_number(const json& v, const std::string& p) {
    if (!v.is_number()) throw ConfigError(p, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(p, "expected a finite number");
    return d;
  }

  static long long as_integer(const json& v, const std::string& p) {
    if (!v.is_number_integer()) throw ConfigError(p, "expected an integer");
    return v.get<long long>();
  }

  const json& object_;
  std::string path_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

void require_all(const std::vector<double>& v, bool (*ok)(double), const std::string& path, const std::string& what) {
  for (std::size_t k = 0; k < v.size(); ++k) {
    require(ok(v[k]), path + "[" + std::to_string(k) + "]", what);
  }
}

bool positive(double x) { return x > 0.0; }
bool unit_interval(double x) { return x >= 0.0 && x <= 1.0; }
bool non_negative(double x) { return x >= 0.0; }

ScenarioKind parse_kind(const std::string& s) {
  if (s == "generate") return ScenarioKind::Generate;
  if (s == "store_sweep_time") return ScenarioKind::StoreSweepTime;
  if (s == "store_sweep_power") return ScenarioKind::StoreSweepPower;
  if (s == "breakdown_map") return ScenarioKind::BreakdownMap;
  if (s == "tomography_noise") return ScenarioKind::TomographyNoise;
  throw ConfigError("scenario",
                    "unknown scenario '" + s +
                        "' (generate | store_sweep_time | store_sweep_power | breakdown_map | tomography_noise)");
}

std::vector<std::string> required_blocks(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Generate:
      return {"beam"};
    case ScenarioKind::StoreSweepTime:
    case ScenarioKind::StoreSweepPower:
      return {"beam", "medium", "control", "probe"};
    case ScenarioKind::BreakdownMap:
      return {"beam", "sweep"};
    case ScenarioKind::TomographyNoise:
      return {"beam", "tomography"};
  }
  return {};
}

// Fixed-format numbers keep CSV output byte-stable.
std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

template <typename... Ts>
std::string csv_row(const Ts&... fields) {
  std::ostringstream s;
  bool first = true;
  auto put = [&](const auto& f) {
    if (!first) s << ',';
    first = false;
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(f)>>) {
      s << num(f);
    } else {
      s << f;
    }
  };
  (put(fields), ...);
  s << '\n';
  return s.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

struct Point {
  json record;
  std::string csv;
  std::string summary;
};

ExperimentOptions experiment_options(const ScenarioConfig& cfg) {
  ExperimentOptions o;
  o.grid_samples = cfg.beam.grid_samples;
  o.grid_extent = cfg.beam.grid_extent;
  o.window_radius = cfg.beam.window_radius;
  o.waist = cfg.beam.waist;
  o.weight_ratio = cfg.beam.weight_ratio;
  o.rel_phase = cfg.beam.rel_phase;
  o.phi = cfg.phi;
  o.solver = cfg.solver;
  o.keep_traces = cfg.output.traces;
  o.keep_beams = cfg.output.dumps || cfg.output.pgm;
  return o;
}

TransverseGrid config_grid(const ScenarioConfig& cfg) {
  return TransverseGrid::square(cfg.beam.grid_samples, cfg.beam.grid_extent);
}

void write_beam_artifacts(const std::filesystem::path& dir, const std::string& stem, const VectorBeam& beam,
                          bool dump, bool pgm) {
  if (dump) {
    write_grid_dump(dir / (stem + ".skygrid"), {beam.sigma_plus, beam.sigma_minus});
  }
  if (pgm) {
    const StokesField s = stokes_from_beam(beam);
    double top = 0.0;
    for (double v : s.s0.values()) top = std::max(top, v);
    write_pgm16(dir / (stem + "_s0.pgm"), s.s0, top);
    const UnitStokesField u = normalize_stokes(s, kSyntheticSupportThreshold);
    RealField sz(u.grid());
    for (std::size_t k = 0; k < sz.size(); ++k) sz[k] = u.mask[k] ? 0.5 * (1.0 + u.sz[k]) : 0.0;
    write_pgm16(dir / (stem + "_sz.pgm"), sz, 1.0);
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StageError("output", "cannot write " + path.string());
  out << text;
}

const std::string kStorageHeader =
    "l,storage_time_us,power_mw,omega_c_over_gamma,eff_ch1,eff_ch2,imbalance,phase_ch1,phase_ch2,"
    "balance_ch1,balance_ch2,n_in,n_out,concurrence_in,concurrence_out\n";

// One storage experiment per (l, storage time, control Rabi frequency).
struct StoragePoint {
  int l;
  double storage_time;
  double rabi;
};

std::vector<Point> run_storage_points(const ScenarioConfig& cfg, const std::vector<StoragePoint>& pts,
                                      const RunOptions& opt, const std::optional<std::filesystem::path>& dir) {
  const double g = cfg.medium.linewidth();
  return run_ordered<Point>(pts.size(), opt.threads, [&](std::size_t k) {
    const StoragePoint& p = pts[k];
    const ControlSchedule control = make_control(cfg, p.storage_time, p.rabi);
    const ProbePulse probe = make_probe(cfg, p.rabi);
    const ExperimentRecord rec = staged("storage", [&] {
      return run_storage_experiment(p.l, p.storage_time, cfg.medium, control, probe, experiment_options(cfg));
    });
    const double power = defaults::power_from_rabi(p.rabi);
    Point out;
    out.record = to_json(rec);
    out.record["point"] = {{"index", k},
                           {"l", p.l},
                           {"storage_time_us", p.storage_time * 1e6},
                           {"power_mw", power},
                           {"omega_c_over_gamma", p.rabi / g}};
    out.csv = csv_row(p.l, p.storage_time * 1e6, power, p.rabi / g, rec.ch1.outcome.efficiency,
                      rec.ch2.outcome.efficiency, rec.imbalance(), rec.ch1.outcome.retrieval_phase,
                      rec.ch2.outcome.retrieval_phase, rec.ch1.outcome.energy_balance, rec.ch2.outcome.energy_balance,
                      rec.n_in(), rec.n_out(), rec.concurrence_in, rec.concurrence_out);
    std::ostringstream line;
    line << std::setprecision(4) << "l=" << p.l << " t=" << p.storage_time * 1e6 << "us P=" << power
         << "mW eff=" << rec.ch1.outcome.efficiency << "/" << rec.ch2.outcome.efficiency << " N=" << rec.n_in()
         << "->" << rec.n_out() << " C=" << rec.concurrence_out;
    out.summary = line.str();
    if (dir) {
      const std::string stem = "point" + std::to_string(k);
      if (rec.beam_in) write_beam_artifacts(*dir, stem + "_in", *rec.beam_in, cfg.output.dumps, cfg.output.pgm);
      if (rec.beam_out) write_beam_artifacts(*dir, stem + "_out", *rec.beam_out, cfg.output.dumps, cfg.output.pgm);
      if (rec.trace_ch1) {
        std::ofstream t1(*dir / (stem + "_ch1.csv"));
        write_storage_csv(t1, *rec.trace_ch1);
        std::ofstream t2(*dir / (stem + "_ch2.csv"));
        write_storage_csv(t2, *rec.trace_ch2);
      }
    }
    return out;
  });
}

ScenarioResult collect(const ScenarioConfig& cfg, const std::string& header, std::vector<Point> points) {
  ScenarioResult r;
  r.results = {{"scenario", to_string(cfg.kind)}, {"seed", cfg.seed}, {"config", to_json(cfg)}};
  r.results["points"] = json::array();
  r.sweep_csv = header;
  for (auto& p : points) {
    r.results["points"].push_back(std::move(p.record));
    r.sweep_csv += p.csv;
    r.summary_lines.push_back(std::move(p.summary));
  }
  return r;
}

ScenarioResult run_generate(const ScenarioConfig& cfg, const RunOptions& opt,
                            const std::optional<std::filesystem::path>& dir) {
  const auto grid = config_grid(cfg);
  auto points = run_ordered<Point>(cfg.beam.l.size(), opt.threads, [&](std::size_t k) {
    const int l = cfg.beam.l[k];
    Diagnostics diag;
    const VectorBeam beam = staged("beam", [&] {
      return make_skyrmion_state(grid, l, cfg.beam.waist, cfg.beam.weight_ratio, cfg.beam.rel_phase, std::nullopt,
                                 &diag);
    });
    const TopologyReport rep = staged("topology", [&] {
      return skyrmion_number(normalize_stokes(stokes_from_beam(beam), kSyntheticSupportThreshold),
                             cfg.beam.window_radius);
    });
    const double c = concurrence(beam);
    Point out;
    out.record = {{"index", k},     {"l", l}, {"topology", to_json(rep)}, {"concurrence", c},
                  {"power", total_power(beam)}, {"warnings", diag.warnings}};
    out.csv = csv_row(l, rep.n_skyr, rep.n_open, rep.integration_radius, c);
    std::ostringstream line;
    line << std::setprecision(8) << "l=" << l << " N=" << rep.n_skyr << " C=" << c;
    out.summary = line.str();
    if (dir) write_beam_artifacts(*dir, "l" + std::to_string(l), beam, cfg.output.dumps, cfg.output.pgm);
    return out;
  });
  return collect(cfg, "l,n_skyr,n_open,integration_radius,concurrence\n", std::move(points));
}

ScenarioResult run_sweep_time(const ScenarioConfig& cfg, const RunOptions& opt,
                              const std::optional<std::filesystem::path>& dir) {
  std::vector<StoragePoint> pts;
  for (int l : cfg.beam.l) {
    for (double t : cfg.sweep.storage_times_us) pts.push_back({l, t * 1e-6, cfg.control.rabi()});
  }
  ScenarioResult r = collect(cfg, kStorageHeader, run_storage_points(cfg, pts, opt, dir));

  // Log-linear fit of each path's efficiency against storage time, per l.
  json fits = json::array();
  for (int l : cfg.beam.l) {
    json entry{{"l", l}};
    for (const char* ch : {"ch1", "ch2"}) {
      std::vector<double> t;
      std::vector<double> eff;
      for (const auto& p : r.results["points"]) {
        if (p["point"]["l"] == l) {
          t.push_back(p["point"]["storage_time_us"].get<double>() * 1e-6);
          eff.push_back(p[ch]["efficiency"].get<double>());
        }
      }
      if (t.size() >= 2 && std::all_of(eff.begin(), eff.end(), [](double e) { return e > 0.0; })) {
        const ExponentialFit f = fit_exponential_decay(t, eff);
        entry[ch] = {{"rate_per_s", f.rate}, {"amplitude", f.amplitude}, {"r_squared", f.r_squared}};
      } else {
        entry[ch] = nullptr;
      }
    }
    entry["expected_rate_per_s"] = 2.0 * cfg.medium.gamma_s;
    fits.push_back(entry);
  }
  r.results["fits"] = fits;
  return r;
}

ScenarioResult run_sweep_power(const ScenarioConfig& cfg, const RunOptions& opt,
                               const std::optional<std::filesystem::path>& dir) {
  std::vector<StoragePoint> pts;
  for (int l : cfg.beam.l) {
    for (double p : cfg.sweep.powers_mw) {
      pts.push_back({l, cfg.sweep.storage_time_us * 1e-6, defaults::rabi_from_power(p)});
    }
  }
  ScenarioResult r = collect(cfg, kStorageHeader, run_storage_points(cfg, pts, opt, dir));

  json spans = json::array();
  for (int l : cfg.beam.l) {
    std::vector<double> e1, e2, imb;
    double worst = 0.0;
    for (const auto& p : r.results["points"]) {
      if (p["point"]["l"] != l) continue;
      e1.push_back(p["ch1"]["efficiency"].get<double>());
      e2.push_back(p["ch2"]["efficiency"].get<double>());
      imb.push_back(p["imbalance"].is_number() ? p["imbalance"].get<double>() : 0.0);
      const double dn = p["n_out"].is_number() ? std::abs(p["n_out"].get<double>() - p["n_in"].get<double>())
                                               : std::numeric_limits<double>::infinity();
      worst = std::max(worst, dn);
    }
    auto rel = [](const std::vector<double>& v) {
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      return *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
    };
    spans.push_back({{"l", l},
                     {"max_abs_delta_n", number_or_null(worst)},
                     {"relative_change_eff_ch1", rel(e1)},
                     {"relative_change_eff_ch2", rel(e2)},
                     {"relative_change_imbalance", rel(imb)}});
  }
  r.results["variation"] = spans;
  return r;
}

ScenarioResult run_breakdown(const ScenarioConfig& cfg, const RunOptions& opt) {
  const auto grid = config_grid(cfg);
  struct Input {
    int l;
    PathState ch1;
    PathState ch2;
    double n_in;
    double c_in;
  };
  std::vector<Input> inputs;
  for (int l : cfg.beam.l) {
    const VectorBeam beam = staged("beam", [&] {
      return make_skyrmion_state(grid, l, cfg.beam.waist, cfg.beam.weight_ratio, cfg.beam.rel_phase);
    });
    auto [ch1, ch2] = decompose(beam);
    const double n_in = staged("topology", [&] {
      return skyrmion_number(normalize_stokes(stokes_from_beam(beam), kSyntheticSupportThreshold),
                             cfg.beam.window_radius)
          .n_skyr;
    });
    inputs.push_back({l, std::move(ch1), std::move(ch2), n_in, concurrence(beam)});
  }
  struct Job {
    std::size_t input;
    double eta1, eta2, phi;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (double e1 : cfg.sweep.eta1) {
      for (double e2 : cfg.sweep.eta2) {
        for (double phi : cfg.sweep.phi) jobs.push_back({i, e1, e2, phi});
      }
    }
  }
  auto points = run_ordered<Point>(jobs.size(), opt.threads, [&](std::size_t k) {
    const Job& j = jobs[k];
    const Input& in = inputs[j.input];
    ChannelSpec spec;
    spec.eta1 = j.eta1;
    spec.eta2 = j.eta2;
    spec.phi = j.phi;
    const PathState ch1 = apply_channel(in.ch1, spec, 0);
    const PathState ch2 = apply_channel(in.ch2, spec, in.l);
    const VectorBeam out = recombine(ch1, ch2);
    double n_out = std::numeric_limits<double>::quiet_NaN();
    double c_out = 0.0;
    if (!(ch1.dead && ch2.dead)) {
      n_out = staged("topology", [&] {
        return skyrmion_number(normalize_stokes(stokes_from_beam(out), kSyntheticSupportThreshold),
                               cfg.beam.window_radius)
            .n_skyr;
      });
      c_out = concurrence(out);
    }
    const double sum = j.eta1 + j.eta2;
    const double c_expected = sum > 0.0 ? 2.0 * std::sqrt(j.eta1 * j.eta2) / sum : 0.0;
    const double ratio = std::max(j.eta1, j.eta2) > 0.0 ? std::min(j.eta1, j.eta2) / std::max(j.eta1, j.eta2) : 0.0;
    Point p;
    p.record = {{"index", k},
                {"l", in.l},
                {"eta1", j.eta1},
                {"eta2", j.eta2},
                {"phi", j.phi},
                {"ratio", ratio},
                {"n_in", in.n_in},
                {"n_out", number_or_null(n_out)},
                {"concurrence_in", in.c_in},
                {"concurrence_out", c_out},
                {"concurrence_expected", c_expected},
                {"dead_ch1", ch1.dead},
                {"dead_ch2", ch2.dead}};
    p.csv = csv_row(in.l, j.eta1, j.eta2, j.phi, ratio, in.n_in, n_out, c_out, c_expected);
    std::ostringstream line;
    line << std::setprecision(4) << "l=" << in.l << " eta=" << j.eta1 << "/" << j.eta2 << " phi=" << j.phi
         << " N=" << n_out << " C=" << c_out;
    p.summary = line.str();
    return p;
  });
  return collect(cfg, "l,eta1,eta2,phi,ratio,n_in,n_out,concurrence_out,concurrence_expected\n", std::move(points));
}

ScenarioResult run_tomography(const ScenarioConfig& cfg, const RunOptions& opt,
                              const std::optional<std::filesystem::path>& dir) {
  const auto grid = config_grid(cfg);
  const auto& tc = cfg.tomography;
  struct Input {
    int l;
    ProjectionSet ps;
    double n_reference;
  };
  std::vector<Input> inputs;
  for (int l : cfg.beam.l) {
    const VectorBeam beam = staged("beam", [&] {
      return make_skyrmion_state(grid, l, cfg.beam.waist, cfg.beam.weight_ratio, cfg.beam.rel_phase);
    });
    ProjectionSet ps = project_intensity(beam);
    const double ref = staged("topology", [&] {
      return skyrmion_number(normalize_stokes(reconstruct_stokes_field(ps, 0.0), tc.support_threshold),
                             cfg.beam.window_radius)
          .n_skyr;
    });
    inputs.push_back({l, std::move(ps), ref});
  }
  struct Job {
    std::size_t input;
    std::size_t fraction;
    int seed_index;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t f = 0; f < tc.background_estimate_fractions.size(); ++f) {
      for (int s = 0; s < tc.seeds; ++s) jobs.push_back({i, f, s});
    }
  }
  auto points = run_ordered<Point>(jobs.size(), opt.threads, [&](std::size_t k) {
    const Job& j = jobs[k];
    const Input& in = inputs[j.input];
    const NoiseModel nm{.shot_scale = tc.shot_scale,
                        .read_sigma = tc.read_sigma_fraction * tc.shot_scale,
                        .background = tc.background,
                        .seed = cfg.seed + static_cast<std::uint64_t>(j.seed_index)};
    const double bg_est = tc.background_estimate_fractions[j.fraction] * tc.background;
    const ProjectionSet noisy = staged("tomography", [&] { return add_camera_noise(in.ps, nm); });
    const Reconstruction rec = staged("tomography", [&] { return reconstruct_stokes(noisy, bg_est); });
    const TopologyReport rep = staged("topology", [&] {
      return skyrmion_number(normalize_stokes(rec.stokes, tc.support_threshold), cfg.beam.window_radius);
    });
    Point p;
    p.record = {{"index", k},
                {"l", in.l},
                {"seed", nm.seed},
                {"background_estimate", bg_est},
                {"n_skyr", rep.n_skyr},
                {"n_open", rep.n_open},
                {"integration_radius", rep.integration_radius},
                {"consistency_residual", rec.consistency_residual},
                {"warnings", rec.warnings}};
    p.csv = csv_row(in.l, nm.seed, bg_est, rep.n_skyr, rep.n_open, rep.integration_radius, rec.consistency_residual);
    std::ostringstream line;
    line << std::setprecision(6) << "l=" << in.l << " seed=" << nm.seed << " bg_est=" << bg_est
         << " N=" << rep.n_skyr;
    p.summary = line.str();
    if (dir && j.seed_index == 0) {
      const std::string stem = "l" + std::to_string(in.l) + "_bg" + std::to_string(j.fraction);
      if (cfg.output.pgm) {
        double top = 0.0;
        for (const RealField* img : noisy.images()) {
          for (double v : img->values()) top = std::max(top, v);
        }
        const auto imgs = noisy.images();
        for (std::size_t i = 0; i < imgs.size(); ++i) {
          write_pgm16(*dir / (stem + "_" + ProjectionSet::kLabels[i] + ".pgm"), *imgs[i], top);
        }
      }
      if (cfg.output.dumps) {
        std::vector<ScalarField> comps;
        for (const RealField* img : noisy.images()) comps.push_back(to_complex(*img));
        write_grid_dump(*dir / (stem + "_projections.skygrid"), comps);
      }
    }
    return p;
  });
  ScenarioResult r =
      collect(cfg, "l,seed,background_estimate,n_skyr,n_open,integration_radius,consistency_residual\n",
              std::move(points));

  // Noise-resampling statistics per (l, background estimate).
  json stats = json::array();
  const auto& pts = r.results["points"];
  std::size_t k = 0;
  for (const Input& in : inputs) {
    for (std::size_t f = 0; f < tc.background_estimate_fractions.size(); ++f) {
      std::vector<double> n;
      for (int s = 0; s < tc.seeds; ++s) n.push_back(pts[k++]["n_skyr"].get<double>());
      const double mean = std::accumulate(n.begin(), n.end(), 0.0) / static_cast<double>(n.size());
      double var = 0.0;
      double worst = 0.0;
      for (double v : n) {
        var += (v - mean) * (v - mean);
        worst = std::max(worst, std::abs(v - in.l));
      }
      const double sd = n.size() > 1 ? std::sqrt(var / static_cast<double>(n.size() - 1)) : 0.0;
      stats.push_back({{"l", in.l},
                       {"background_estimate_fraction", tc.background_estimate_fractions[f]},
                       {"n_reference", in.n_reference},
                       {"mean", mean},
                       {"std", sd},
                       {"bias", mean - in.l},
                       {"max_abs_error", worst},
                       {"samples", n.size()}});
    }
  }
  r.results["statistics"] = stats;
  return r;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string python_plot_script(const std::string& x_column) {
  return R"(import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
x_column = ")" + x_column + R"("

with open(here / "data.csv", newline="") as fh:
    rows = list(csv.DictReader(fh))
if not rows:
    sys.exit("data.csv is empty")

columns = [c for c in rows[0] if c not in ("l", x_column)]
series = defaultdict(list)
for row in rows:
    series[row.get("l", "")].append(row)

for column in columns:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for l, group in sorted(series.items()):
        xs, ys = [], []
        for row in group:
            try:
                xs.append(float(row[x_column]))
                ys.append(float(row[column]))
            except ValueError:
                continue
        ax.plot(xs, ys, "o-", label=f"l={l}")
    ax.set_xlabel(x_column)
    ax.set_ylabel(column)
    ax.legend()
    fig.tight_layout()
    fig.savefig(here / f"{column}.png", dpi=120)
    plt.close(fig)
)";
}

}  // namespace

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Generate:
      return "generate";
    case ScenarioKind::StoreSweepTime:
      return "store_sweep_time";
    case ScenarioKind::StoreSweepPower:
      return "store_sweep_power";
    case ScenarioKind::BreakdownMap:
      return "breakdown_map";
    case ScenarioKind::TomographyNoise:
      return "tomography_noise";
  }
  return "unknown";
}

double ControlConfig::rabi() const {
  if (rabi_rad_s) return *rabi_rad_s;
  return defaults::rabi_from_power(power_mw.value_or(defaults::kControlPowerMw));
}

ExponentialFit fit_exponential_decay(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size() || t.size() < 2) {
    throw ParameterError("exponential fit needs at least two (t, y) pairs");
  }
  const auto n = static_cast<double>(t.size());
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(y[k] > 0.0)) throw ParameterError("exponential fit needs positive samples");
    const double ly = std::log(y[k]);
    st += t[k];
    sl += ly;
    stt += t[k] * t[k];
    stl += t[k] * ly;
  }
  const double denom = n * stt - st * st;
  if (!(denom > 0.0)) throw ParameterError("exponential fit needs distinct sample times");
  const double slope = (n * stl - st * sl) / denom;
  const double intercept = (sl - slope * st) / n;
  ExponentialFit f{.rate = -slope, .amplitude = std::exp(intercept), .r_squared = 0.0};
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double model = f.amplitude * std::exp(-f.rate * t[k]);
    ss_res += (y[k] - model) * (y[k] - model);
    ss_tot += (y[k] - mean) * (y[k] - mean);
  }
  f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  return f;
}

ScenarioConfig parse_config(const json& doc) {
  ObjectReader root(doc, "");
  ScenarioConfig cfg;
  require(root.has("scenario"), "scenario", "missing scenario id");
  cfg.kind = parse_kind(root.string("scenario", ""));
  for (const auto& block : required_blocks(cfg.kind)) {
    require(root.has(block), block, std::string("missing block required by scenario ") + to_string(cfg.kind));
  }
  const long long seed = root.integer("seed", 0);
  require(seed >= 0, "seed", "must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);

  {
    ObjectReader b = root.child("beam");
    const std::vector<int> default_l = cfg.kind == ScenarioKind::Generate ? std::vector<int>{1, 2, 3}
                                       : cfg.kind == ScenarioKind::StoreSweepTime ||
                                               cfg.kind == ScenarioKind::StoreSweepPower
                                           ? std::vector<int>{2}
                                           : std::vector<int>{1, 2, 3};
    cfg.beam.l = b.integers("l", default_l);
    for (std::size_t k = 0; k < cfg.beam.l.size(); ++k) {
      const int l = cfg.beam.l[k];
      require(l != 0 && std::abs(l) <= kMaxProjectedOrder, "beam.l[" + std::to_string(k) + "]",
              "must be non-zero with |l| <= " + std::to_string(kMaxProjectedOrder));
    }
    cfg.beam.waist = b.number("waist", 1.0);
    require(cfg.beam.waist > 0.0, "beam.waist", "must be positive");
    cfg.beam.weight_ratio = b.number("weight_ratio", 1.0);
    require(cfg.beam.weight_ratio > 0.0, "beam.weight_ratio", "must be positive");
    cfg.beam.rel_phase = b.number("rel_phase", 0.0);
    const long long n = b.integer("grid_samples", defaults::kGridSamples);
    require(n >= 16 && n % 2 == 0 && n <= 8192, "beam.grid_samples", "must be even and in [16, 8192]");
    cfg.beam.grid_samples = static_cast<std::size_t>(n);
    cfg.beam.grid_extent = b.number("grid_extent", defaults::kGridExtent);
    require(cfg.beam.grid_extent > 0.0, "beam.grid_extent", "must be positive");
    cfg.beam.window_radius = b.number("window_radius", defaults::kWindowRadius);
    require(cfg.beam.window_radius > 0.0 && cfg.beam.window_radius <= cfg.beam.grid_extent, "beam.window_radius",
            "must lie in (0, grid_extent]");
    b.finish();
  }
  {
    ObjectReader m = root.child("medium");
    cfg.medium.optical_depth = m.number("optical_depth", defaults::kOpticalDepth);
    require(cfg.medium.optical_depth > 0.0, "medium.optical_depth", "must be positive");
    const double linewidth_hz = m.number("linewidth_hz", defaults::kLinewidth / (2.0 * std::numbers::pi));
    require(linewidth_hz > 0.0, "medium.linewidth_hz", "must be positive");
    cfg.medium.gamma = 2.0 * std::numbers::pi * linewidth_hz;
    const auto gamma_s = m.optional_number("gamma_s_rad_s");
    const auto halving = m.optional_number("efficiency_halving_us");
    require(!(gamma_s && halving), "medium.efficiency_halving_us", "conflicts with medium.gamma_s_rad_s");
    if (gamma_s) {
      require(*gamma_s >= 0.0, "medium.gamma_s_rad_s", "must be non-negative");
      cfg.medium.gamma_s = *gamma_s;
    }
    if (halving) {
      require(*halving > 0.0, "medium.efficiency_halving_us", "must be positive");
      cfg.medium.gamma_s = 0.5 * std::numbers::ln2 / (*halving * 1e-6);
    }
    const long long cells = m.integer("cells", defaults::kCells);
    require(cells >= 50 && cells <= 100000, "medium.cells", "must lie in [50, 100000]");
    cfg.medium.cells = static_cast<int>(cells);
    cfg.medium.one_photon_detuning = m.number("one_photon_detuning_rad_s", 0.0);
    cfg.medium.two_photon_detuning = m.number("two_photon_detuning_rad_s", 0.0);
    ObjectReader od = m.child("od_model");
    const std::string kind = od.string("kind", "inverse_order");
    if (kind == "inverse_order") {
      cfg.medium.od_model.kind = OdModel::Kind::InverseOrder;
    } else if (kind == "power") {
      cfg.medium.od_model.kind = OdModel::Kind::Power;
      cfg.medium.od_model.exponent = od.number("exponent", 1.0);
      require(cfg.medium.od_model.exponent >= 0.0, "medium.od_model.exponent", "must be non-negative");
    } else if (kind == "table") {
      cfg.medium.od_model.kind = OdModel::Kind::Table;
      cfg.medium.od_model.table = od.numbers("table", {});
      require(!cfg.medium.od_model.table.empty(), "medium.od_model.table", "required for kind 'table'");
      require_all(cfg.medium.od_model.table, positive, "medium.od_model.table", "must be positive");
    } else {
      throw ConfigError("medium.od_model.kind", "expected inverse_order | power | table");
    }
    od.finish();
    m.finish();
  }
  {
    ObjectReader c = root.child("control");
    cfg.control.power_mw = c.optional_number("power_mw");
    cfg.control.rabi_rad_s = c.optional_number("rabi_rad_s");
    require(!(cfg.control.power_mw && cfg.control.rabi_rad_s), "control.rabi_rad_s", "conflicts with control.power_mw");
    if (cfg.control.power_mw) require(*cfg.control.power_mw > 0.0, "control.power_mw", "must be positive");
    if (cfg.control.rabi_rad_s) require(*cfg.control.rabi_rad_s > 0.0, "control.rabi_rad_s", "must be positive");
    cfg.control.ramp_us = c.number("ramp_us", defaults::kRamp * 1e6);
    require(cfg.control.ramp_us > 0.0, "control.ramp_us", "must be positive");
    cfg.control.off_delay_widths = c.number("off_delay_widths", defaults::kControlOffDelayWidths);
    const std::string shape = c.string("shape", "raised_cosine");
    if (shape == "raised_cosine") {
      cfg.control.shape = ControlShape::RaisedCosine;
    } else if (shape == "always_on") {
      cfg.control.shape = ControlShape::AlwaysOn;
    } else {
      throw ConfigError("control.shape", "expected raised_cosine | always_on");
    }
    c.finish();
  }
  {
    ObjectReader p = root.child("probe");
    cfg.probe.width_us = p.number("width_us", defaults::kPulseWidth * 1e6);
    require(cfg.probe.width_us > 0.0, "probe.width_us", "must be positive");
    cfg.probe.center_widths = p.number("center_widths", defaults::kPulseCenterWidths);
    require(cfg.probe.center_widths > 0.0, "probe.center_widths", "must be positive");
    cfg.probe.rabi_fraction = p.number("rabi_fraction", defaults::kProbeFraction);
    require(cfg.probe.rabi_fraction > 0.0, "probe.rabi_fraction", "must be positive");
    p.finish();
  }
  {
    ObjectReader s = root.child("solver");
    cfg.solver.time_step = s.number("time_step", defaults::kTimeStep);
    require(cfg.solver.time_step > 0.0, "solver.time_step", "must be positive");
    if (auto end = s.optional_number("end_time_us")) {
      require(*end > 0.0, "solver.end_time_us", "must be positive");
      cfg.solver.end_time = *end * 1e-6;
    }
    s.finish();
  }
  {
    ObjectReader ch = root.child("channel");
    cfg.phi = ch.number("phi", 0.0);
    ch.finish();
  }
  {
    ObjectReader w = root.child("sweep");
    cfg.sweep.storage_times_us = w.numbers("storage_times_us", cfg.sweep.storage_times_us);
    require_all(cfg.sweep.storage_times_us, positive, "sweep.storage_times_us", "must be positive");
    cfg.sweep.powers_mw = w.numbers("powers_mw", cfg.sweep.powers_mw);
    require_all(cfg.sweep.powers_mw, positive, "sweep.powers_mw", "must be positive");
    cfg.sweep.storage_time_us = w.number("storage_time_us", cfg.sweep.storage_time_us);
    require(cfg.sweep.storage_time_us > 0.0, "sweep.storage_time_us", "must be positive");
    cfg.sweep.eta1 = w.numbers("eta1", cfg.sweep.eta1);
    require_all(cfg.sweep.eta1, unit_interval, "sweep.eta1", "must lie in [0, 1]");
    cfg.sweep.eta2 = w.numbers("eta2", cfg.sweep.eta2);
    require_all(cfg.sweep.eta2, unit_interval, "sweep.eta2", "must lie in [0, 1]");
    cfg.sweep.phi = w.numbers("phi", cfg.sweep.phi);
    w.finish();
  }
  {
    ObjectReader t = root.child("tomography");
    auto& tc = cfg.tomography;
    tc.shot_scale = t.number("shot_scale", tc.shot_scale);
    require(tc.shot_scale >= 0.0, "tomography.shot_scale", "must be non-negative");
    tc.read_sigma_fraction = t.number("read_sigma_fraction", tc.read_sigma_fraction);
    require(tc.read_sigma_fraction >= 0.0, "tomography.read_sigma_fraction", "must be non-negative");
    require(tc.shot_scale > 0.0 || tc.read_sigma_fraction == 0.0, "tomography.read_sigma_fraction",
            "needs shot_scale > 0 to set the count scale");
    tc.background = t.number("background", tc.background);
    require(tc.background >= 0.0, "tomography.background", "must be non-negative");
    tc.background_estimate_fractions = t.numbers("background_estimate_fractions", tc.background_estimate_fractions);
    require_all(tc.background_estimate_fractions, non_negative, "tomography.background_estimate_fractions",
                "must be non-negative");
    const long long seeds = t.integer("seeds", tc.seeds);
    require(seeds >= 1 && seeds <= 100000, "tomography.seeds", "must lie in [1, 100000]");
    tc.seeds = static_cast<int>(seeds);
    tc.support_threshold = t.number("support_threshold", tc.support_threshold);
    require(tc.support_threshold > 0.0 && tc.support_threshold < 1.0, "tomography.support_threshold",
            "must lie in (0, 1)");
    t.finish();
  }
  {
    ObjectReader o = root.child("output");
    cfg.output.dir = o.string("dir", "out");
    require(!cfg.output.dir.empty(), "output.dir", "must not be empty");
    cfg.output.dumps = o.boolean("dumps", false);
    cfg.output.pgm = o.boolean("pgm", false);
    cfg.output.traces = o.boolean("traces", false);
    o.finish();
  }
  root.finish();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("", "cannot read config file " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed config: ") + e.what());
  }
  return parse_config(doc);
}

void check_physics(const ScenarioConfig& cfg) {
  const bool storage = cfg.kind == ScenarioKind::StoreSweepTime || cfg.kind == ScenarioKind::StoreSweepPower;
  if (!storage) return;
  if (cfg.probe.rabi_fraction >= 0.1) {
    throw ConfigError("probe.rabi_fraction", "weak-probe regime violated: probe/control Rabi ratio " +
                                                 num(cfg.probe.rabi_fraction) + " >= 0.1");
  }
  std::vector<double> rabis;
  if (cfg.kind == ScenarioKind::StoreSweepPower) {
    for (double p : cfg.sweep.powers_mw) rabis.push_back(defaults::rabi_from_power(p));
  } else {
    rabis.push_back(cfg.control.rabi());
  }
  for (double rabi : rabis) {
    const double bound = max_stable_time_step(cfg.medium, effective_od(cfg.medium.optical_depth, 0,
                                                                       cfg.medium.od_model), rabi);
    if (cfg.solver.time_step > bound) {
      throw ConfigError("solver.time_step", "exceeds the stability bound " + num(bound) + "/Gamma at Omega_c = " +
                                                num(rabi) + " rad/s");
    }
  }
  for (int l : cfg.beam.l) {
    try {
      effective_od(cfg.medium.optical_depth, std::abs(l), cfg.medium.od_model);
    } catch (const ParameterError& e) {
      throw ConfigError("medium.od_model", e.what());
    }
  }
  if (cfg.control.shape == ControlShape::RaisedCosine &&
      cfg.control.ramp_us >= cfg.control.off_delay_widths * cfg.probe.width_us + cfg.probe.center_widths *
                                                                                     cfg.probe.width_us) {
    throw ConfigError("control.ramp_us", "ramp starts before t = 0");
  }
}

json to_json(const ScenarioConfig& cfg) {
  json control{{"rabi_rad_s", cfg.control.rabi()},
               {"power_mw", defaults::power_from_rabi(cfg.control.rabi())},
               {"ramp_us", cfg.control.ramp_us},
               {"off_delay_widths", cfg.control.off_delay_widths},
               {"shape", cfg.control.shape == ControlShape::AlwaysOn ? "always_on" : "raised_cosine"}};
  return {{"scenario", to_string(cfg.kind)},
          {"seed", cfg.seed},
          {"beam",
           {{"l", cfg.beam.l},
            {"waist", cfg.beam.waist},
            {"weight_ratio", cfg.beam.weight_ratio},
            {"rel_phase", cfg.beam.rel_phase},
            {"grid_samples", cfg.beam.grid_samples},
            {"grid_extent", cfg.beam.grid_extent},
            {"window_radius", cfg.beam.window_radius}}},
          {"medium", to_json(cfg.medium)},
          {"control", control},
          {"probe",
           {{"width_us", cfg.probe.width_us},
            {"center_widths", cfg.probe.center_widths},
            {"rabi_fraction", cfg.probe.rabi_fraction}}},
          {"solver",
           {{"time_step", cfg.solver.time_step},
            {"end_time_us", cfg.solver.end_time ? json(*cfg.solver.end_time * 1e6) : json(nullptr)}}},
          {"channel", {{"phi", cfg.phi}}},
          {"sweep",
           {{"storage_times_us", cfg.sweep.storage_times_us},
            {"powers_mw", cfg.sweep.powers_mw},
            {"storage_time_us", cfg.sweep.storage_time_us},
            {"eta1", cfg.sweep.eta1},
            {"eta2", cfg.sweep.eta2},
            {"phi", cfg.sweep.phi}}},
          {"tomography",
           {{"shot_scale", cfg.tomography.shot_scale},
            {"read_sigma_fraction", cfg.tomography.read_sigma_fraction},
            {"background", cfg.tomography.background},
            {"background_estimate_fractions", cfg.tomography.background_estimate_fractions},
            {"seeds", cfg.tomography.seeds},
            {"support_threshold", cfg.tomography.support_threshold}}}};
}

ControlSchedule make_control(const ScenarioConfig& cfg, double storage_time, std::optional<double> rabi) {
  const double omega = rabi.value_or(cfg.control.rabi());
  if (cfg.control.shape == ControlShape::AlwaysOn) {
    return ControlSchedule::always_on(omega);
  }
  const double width = cfg.probe.width_us * 1e-6;
  const double off = (cfg.probe.center_widths + cfg.control.off_delay_widths) * width;
  return ControlSchedule::storage(omega, off, storage_time, cfg.control.ramp_us * 1e-6);
}

ProbePulse make_probe(const ScenarioConfig& cfg, double control_rabi) {
  const double width = cfg.probe.width_us * 1e-6;
  return {.peak_rabi = cfg.probe.rabi_fraction * control_rabi,
          .width = width,
          .center_time = cfg.probe.center_widths * width};
}

namespace {

ScenarioResult dispatch(const ScenarioConfig& cfg, const RunOptions& opt,
                        const std::optional<std::filesystem::path>& dir) {
  switch (cfg.kind) {
    case ScenarioKind::Generate:
      return run_generate(cfg, opt, dir);
    case ScenarioKind::StoreSweepTime:
      return run_sweep_time(cfg, opt, dir);
    case ScenarioKind::StoreSweepPower:
      return run_sweep_power(cfg, opt, dir);
    case ScenarioKind::BreakdownMap:
      return run_breakdown(cfg, opt);
    case ScenarioKind::TomographyNoise:
      return run_tomography(cfg, opt, dir);
  }
  throw ConfigError("scenario", "unhandled scenario");
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  check_physics(config);
  return dispatch(config, options, std::nullopt);
}

ScenarioResult run_and_write(const ScenarioConfig& config, const RunOptions& options) {
  check_physics(config);
  const auto& dir = config.output.dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw StageError("output", "cannot create " + dir.string() + ": " + ec.message());

  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  const bool artifacts = config.output.dumps || config.output.pgm || config.output.traces;
  ScenarioResult r = dispatch(config, options, artifacts ? std::optional(dir) : std::nullopt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_text(dir / "results.json", r.results.dump(2) + "\n");
  write_text(dir / "sweep.csv", r.sweep_csv);
  const json meta{{"started_utc", started},
                  {"finished_utc", utc_now()},
                  {"wall_seconds", wall},
                  {"threads", options.threads},
                  {"points", r.summary_lines.size()}};
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
  return r;
}

std::vector<std::filesystem::path> export_plots(const std::filesystem::path& results_dir) {
  std::ifstream in(results_dir / "results.json");
  if (!in) throw StageError("export", "no results.json in " + results_dir.string());
  std::ifstream csv(results_dir / "sweep.csv");
  if (!csv) throw StageError("export", "no sweep.csv in " + results_dir.string());
  const json results = json::parse(in);
  const std::string scenario = results.at("scenario").get<std::string>();

  static const std::map<std::string, std::string> x_axis{{"generate", "l"},
                                                         {"store_sweep_time", "storage_time_us"},
                                                         {"store_sweep_power", "omega_c_over_gamma"},
                                                         {"breakdown_map", "ratio"},
                                                         {"tomography_noise", "seed"}};
  const std::filesystem::path out = results_dir / "plots";
  std::filesystem::create_directories(out);
  std::ostringstream data;
  data << csv.rdbuf();
  write_text(out / "data.csv", data.str());
  write_text(out / "plot.py", python_plot_script(x_axis.at(scenario)));
  return {out / "data.csv", out / "plot.py"};
}

}  // namespace skyrmem
