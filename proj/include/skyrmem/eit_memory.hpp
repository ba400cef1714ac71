#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "skyrmem/grid.hpp"

namespace skyrmem {

// Mapping from azimuthal order l to the effective optical depth of LG^l_0.
// The default, D_l = D0 / (l + 1), follows from the beam area growing as
// (l + 1) w0^2 for the same atom-cloud overlap.
struct OdModel {
  enum class Kind { InverseOrder, Power, Table };
  Kind kind = Kind::InverseOrder;
  double exponent = 1.0;      // Power: D_l = D0 / (l + 1)^exponent
  std::vector<double> table;  // Table: D_l = D0 * table[l]
};

double effective_od(double d0, int l, const OdModel& model = {});

// Atomic medium. Rates in rad/s.
struct MediumParams {
  double optical_depth = 100.0;  // D0, fundamental mode
  double gamma = 0.0;            // decay rate of |3>; 0 selects the default
  double gamma_s = 0.0;          // spin-wave (rho21) decoherence rate
  int cells = 200;               // spatial intervals along the medium
  OdModel od_model;
  double one_photon_detuning = 0.0;
  double two_photon_detuning = 0.0;

  double linewidth() const;
};

enum class ControlShape { RaisedCosine, AlwaysOn };

// Control Rabi frequency: peak until off_time - ramp, raised-cosine ramp
// down to zero at off_time, dark until on_time, ramp back up over
// [on_time, on_time + ramp]. AlwaysOn ignores the timing fields.
struct ControlSchedule {
  double omega_c_peak = 0.0;  // rad/s
  double off_time = 0.0;      // s
  double on_time = 0.0;       // s
  double ramp = 0.1e-6;       // s
  ControlShape shape = ControlShape::RaisedCosine;

  double rabi_at(double t) const;
  double storage_time() const { return on_time - off_time; }

  static ControlSchedule storage(double omega_c, double off_time, double storage_time, double ramp);
  static ControlSchedule always_on(double omega_c);
};

// Gaussian probe. `width` is the intensity FWHM.
struct ProbePulse {
  double peak_rabi = 0.0;  // rad/s
  double width = 0.5e-6;   // s
  double center_time = 1.25e-6;

  Complex envelope(double t) const;  // relative to peak_rabi
};

struct SolverSettings {
  double time_step = 0.05;          // units of 1/Gamma
  std::optional<double> end_time;   // s; default covers retrieval tail
};

// Traces are |Omega(L, t)|^2 / peak_rabi^2 on t_axis.
struct StorageResult {
  int l = 0;
  double optical_depth = 0.0;
  double linewidth = 0.0;
  std::vector<double> t_axis;
  std::vector<double> input_trace;
  std::vector<double> output_trace;
  std::vector<double> leak_trace;
  std::vector<double> retrieved_trace;
  std::vector<Complex> output_field;  // Omega(L, t) / peak_rabi
  double retrieval_start = 0.0;        // leak before, retrieval from here on
  double efficiency = 0.0;
  double leakage = 0.0;
  Complex retrieval_amp{0.0, 0.0};
  // rho21(z) / (peak_rabi / Gamma) at control-off, cells + 1 nodes.
  std::vector<Complex> spinwave_snapshot;
  double time_step = 0.0;  // s
};

// Largest stable explicit time step, units of 1/Gamma.
double max_stable_time_step(const MediumParams& medium, double optical_depth, double omega_c_peak);

// Integrates, in the co-moving frame with z in medium lengths,
//   dOmega/dz  = i (D_l / 2) rho31                       (times Gamma)
//   drho31/dt  = i Omega/2 + i Omega_c/2 rho21 - (Gamma/2 - i Delta) rho31
//   drho21/dt  = i Omega_c/2 rho31 - (gamma_s - i delta) rho21
// with the method of lines: cumulative trapezoid in z, classical RK4 in t.
// Weak probe: peak_rabi / omega_c_peak must stay below 0.1.
StorageResult simulate_storage(const MediumParams& medium, const ControlSchedule& control, const ProbePulse& probe,
                               int l, double storage_time, const SolverSettings& settings = {});

// Ratio of time-integrated retrieved to input power. Each window is the span
// where a trace exceeds 1e-6 of its own peak; overlapping spans throw
// WindowingError.
double storage_efficiency(std::span<const double> input_trace, std::span<const double> retrieved_trace);

double retrieval_phase(const StorageResult& result);

// Intensity-centroid delay of the transmitted pulse, s.
double group_delay(const StorageResult& result);

// (integral of leak + retrieved) / integral of input.
double energy_balance(const StorageResult& result);

void write_storage_csv(std::ostream& out, const StorageResult& result);
nlohmann::json to_json(const StorageResult& result);
nlohmann::json to_json(const MediumParams& medium);
nlohmann::json to_json(const ControlSchedule& control);
nlohmann::json to_json(const ProbePulse& probe);

}  // namespace skyrmem
