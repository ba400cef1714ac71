#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "skyrmem/dualpath.hpp"
#include "skyrmem/tomography.hpp"

namespace skyrmem {

// Schema violation; `path` names the offending key, e.g. "medium.cells".
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Failure inside a pipeline stage ("beam", "storage", "topology", ...).
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class ScenarioKind { Generate, StoreSweepTime, StoreSweepPower, BreakdownMap, TomographyNoise };

const char* to_string(ScenarioKind kind);

struct BeamConfig {
  std::vector<int> l{1};
  double waist = 1.0;
  double weight_ratio = 1.0;
  double rel_phase = 0.0;
  std::size_t grid_samples = 256;
  double grid_extent = 6.0;
  double window_radius = 5.0;
};

struct ControlConfig {
  std::optional<double> power_mw;   // mutually exclusive with rabi_rad_s
  std::optional<double> rabi_rad_s;
  double ramp_us = 0.1;
  double off_delay_widths = 2.2;
  ControlShape shape = ControlShape::RaisedCosine;

  double rabi() const;
};

struct ProbeConfig {
  double width_us = 0.5;
  double center_widths = 2.5;
  double rabi_fraction = 0.01;  // of the control peak
};

struct SweepConfig {
  std::vector<double> storage_times_us{0.5, 1.5, 2.5};
  std::vector<double> powers_mw{6.0, 10.0, 18.0, 33.0, 45.0, 53.0, 75.0};
  double storage_time_us = 0.5;  // fixed time for the power sweep
  std::vector<double> eta1{0.0, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> eta2{0.0, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> phi{0.0};
};

struct TomographyConfig {
  double shot_scale = 1e4;
  double read_sigma_fraction = 0.01;  // of shot_scale
  double background = 0.0;            // counts
  std::vector<double> background_estimate_fractions{1.0};
  int seeds = 100;
  double support_threshold = kNoisySupportThreshold;
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  bool dumps = false;
  bool pgm = false;
  bool traces = false;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Generate;
  std::uint64_t seed = 0;
  BeamConfig beam;
  MediumParams medium;
  ControlConfig control;
  ProbeConfig probe;
  SolverSettings solver;
  double phi = 0.0;  // extra ch2 phase for storage scenarios
  SweepConfig sweep;
  TomographyConfig tomography;
  OutputConfig output;
};

// Strict parse: unknown keys, wrong types and out-of-range values throw
// ConfigError naming the key path.
ScenarioConfig parse_config(const nlohmann::json& doc);
ScenarioConfig load_config(const std::filesystem::path& path);

// Physical-range checks that need several blocks at once (weak probe, time
// step stability, schedule consistency). Throws ConfigError.
void check_physics(const ScenarioConfig& config);

// Normalised echo of a parsed config, part of results.json.
nlohmann::json to_json(const ScenarioConfig& config);

struct ExponentialFit {
  double rate = 0.0;  // y = amplitude * exp(-rate * t)
  double amplitude = 0.0;
  double r_squared = 0.0;  // of the fitted exponential, linear scale
};

// Least-squares line through (t, ln y).
ExponentialFit fit_exponential_decay(std::span<const double> t, std::span<const double> y);

ControlSchedule make_control(const ScenarioConfig& config, double storage_time, std::optional<double> rabi = {});
ProbePulse make_probe(const ScenarioConfig& config, double control_rabi);

struct ScenarioResult {
  nlohmann::json results;     // deterministic for a given config and seed
  std::string sweep_csv;
  std::vector<std::string> summary_lines;  // one per sweep point, in index order
};

struct RunOptions {
  unsigned threads = 0;  // 0 selects hardware concurrency
};

// Runs `count` tasks on a worker pool; result[k] = task(k) regardless of
// completion order. The first exception is rethrown after all workers stop.
template <typename T>
std::vector<T> run_ordered(std::size_t count, unsigned threads, const std::function<T(std::size_t)>& task);

ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

// run_scenario plus results.json, sweep.csv, metadata.json and the optional
// dumps under config.output.dir.
ScenarioResult run_and_write(const ScenarioConfig& config, const RunOptions& options = {});

// Columnar plot data and a plotting script next to an existing results.json.
std::vector<std::filesystem::path> export_plots(const std::filesystem::path& results_dir);

}  // namespace skyrmem

#include "skyrmem/detail/worker_pool.hpp"
