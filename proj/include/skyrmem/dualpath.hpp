#pragma once

#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "skyrmem/beam.hpp"
#include "skyrmem/eit_memory.hpp"
#include "skyrmem/topology.hpp"

namespace skyrmem {

enum class PathLabel { Ch1, Ch2 };

const char* to_string(PathLabel label);

// What a simulated storage pass did to one path.
struct PathOutcome {
  int l = 0;
  double optical_depth = 0.0;
  double efficiency = 0.0;
  double retrieval_phase = 0.0;
  double leakage = 0.0;
  double energy_balance = 0.0;
  bool dead = false;
};

// One spatial path after the polarisation split. Both paths travel as sigma+;
// ch2 is mapped back to sigma- on recombination.
struct PathState {
  ScalarField mode;  // unit-power spatial mode
  PathLabel label = PathLabel::Ch1;
  Complex amp{0.0, 0.0};
  int l = 0;  // azimuthal order carried by `mode`
  bool dead = false;
  std::optional<PathOutcome> storage;
};

struct SimulatedSource {
  MediumParams medium;
  ControlSchedule control;
  ProbePulse probe;
  double storage_time = 0.0;
  SolverSettings solver;
};

// Per-path channel. The analytic source scales ch1 by sqrt(eta1) and ch2 by
// sqrt(eta2) e^{i phi}. A simulated source replaces sqrt(eta) e^{i 0} by
// sqrt(efficiency) e^{i retrieval_phase} from the storage solver; phi is still
// added to ch2.
struct ChannelSpec {
  double eta1 = 1.0;
  double eta2 = 1.0;
  double phi = 0.0;
  std::optional<SimulatedSource> simulated;
  // Multiplies both path modes; for robustness studies only.
  std::optional<ScalarField> aberration;

  void validate() const;
  static ChannelSpec identity() { return {}; }
};

// Largest |l| tried when a beam without metadata is projected onto the basis.
inline constexpr int kMaxProjectedOrder = 10;
// Power fraction outside the two-mode basis tolerated by decompose.
inline constexpr double kNonBasisTolerance = 1e-3;

// Splits a beam into ch1 (sigma+ content on LG^0_0) and ch2 (sigma- content on
// LG^l_0). With metadata the basis waists and l come from it. Without, both
// modes are taken at waist 1 and l is the order with the largest overlap.
std::pair<PathState, PathState> decompose(const VectorBeam& beam);

PathOutcome simulate_path(const SimulatedSource& source, int l);

// Applies a precomputed storage outcome; `extra_phase` is added on top.
PathState apply_outcome(PathState path, const PathOutcome& outcome, double extra_phase);

PathState apply_channel(PathState path, const ChannelSpec& spec, int l_of_path);

// sigma+ <- amp1 mode1, sigma- <- amp2 mode2. No renormalisation.
VectorBeam recombine(const PathState& ch1, const PathState& ch2);

struct ExperimentOptions {
  std::size_t grid_samples = 256;
  double grid_extent = 6.0;
  double window_radius = kDefaultWindowRadius;
  double waist = 1.0;
  double weight_ratio = 1.0;
  double rel_phase = 0.0;
  double phi = 0.0;  // extra ch2 phase
  SolverSettings solver;
  bool keep_traces = false;
  bool keep_beams = false;
};

struct PathRecord {
  PathOutcome outcome;
  Complex amp_in{0.0, 0.0};
  Complex amp_out{0.0, 0.0};
};

struct ExperimentRecord {
  int l = 0;
  double storage_time = 0.0;
  MediumParams medium;
  ControlSchedule control;
  ProbePulse probe;
  ExperimentOptions options;

  PathRecord ch1;
  PathRecord ch2;
  TopologyReport topology_in;
  std::optional<TopologyReport> topology_out;  // empty when both paths died
  double concurrence_in = 0.0;
  double concurrence_out = 0.0;
  std::vector<std::string> warnings;

  std::optional<StorageResult> trace_ch1;
  std::optional<StorageResult> trace_ch2;
  std::optional<VectorBeam> beam_in;
  std::optional<VectorBeam> beam_out;

  double n_in() const { return topology_in.n_skyr; }
  double n_out() const;  // NaN when topology_out is empty
  // eta2 / eta1 in power; NaN when ch1 is dead.
  double imbalance() const;
};

// make_skyrmion_state -> decompose -> store both paths (concurrently) ->
// recombine -> Stokes -> skyrmion number and concurrence.
ExperimentRecord run_storage_experiment(int l, double storage_time, const MediumParams& medium,
                                        const ControlSchedule& control, const ProbePulse& probe,
                                        const ExperimentOptions& options = {});

nlohmann::json to_json(const PathOutcome& outcome);
nlohmann::json to_json(const ExperimentRecord& record);

}  // namespace skyrmem
