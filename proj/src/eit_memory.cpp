#include "skyrmem/eit_memory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <numbers>
#include <ostream>
#include <sstream>

#include "skyrmem/defaults.hpp"

namespace skyrmem {

namespace {

constexpr double kWeakProbeLimit = 0.1;
// RK4 reaches about 2.8 on the negative real axis; keep a margin.
constexpr double kStabilityConstant = 2.5;
constexpr double kSupportFraction = 1e-6;

double rect_sum(std::span<const double> v) { return compensated_sum(v); }

double centroid(std::span<const double> t, std::span<const double> w) {
  std::vector<double> tw(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) tw[k] = t[k] * w[k];
  const double norm = rect_sum(w);
  if (!(norm > 0.0)) {
    throw ParameterError("centroid of an empty trace");
  }
  return rect_sum(tw) / norm;
}

}  // namespace

double effective_od(double d0, int l, const OdModel& model) {
  if (l < 0) {
    throw ParameterError("effective_od expects l >= 0 (use |l|)");
  }
  if (!(d0 > 0.0)) {
    throw ParameterError("optical depth must be positive");
  }
  switch (model.kind) {
    case OdModel::Kind::InverseOrder:
      return d0 / (l + 1.0);
    case OdModel::Kind::Power:
      return d0 / std::pow(l + 1.0, model.exponent);
    case OdModel::Kind::Table:
      if (static_cast<std::size_t>(l) >= model.table.size()) {
        throw ParameterError("od_model table has no entry for l = " + std::to_string(l));
      }
      return d0 * model.table[static_cast<std::size_t>(l)];
  }
  throw ParameterError("unknown od_model kind");
}

double MediumParams::linewidth() const { return gamma > 0.0 ? gamma : defaults::kLinewidth; }

double ControlSchedule::rabi_at(double t) const {
  if (shape == ControlShape::AlwaysOn) {
    return omega_c_peak;
  }
  const double down_start = off_time - ramp;
  if (t <= down_start) return omega_c_peak;
  if (t < off_time) return omega_c_peak * 0.5 * (1.0 + std::cos(std::numbers::pi * (t - down_start) / ramp));
  if (t <= on_time) return 0.0;
  if (t < on_time + ramp) return omega_c_peak * 0.5 * (1.0 - std::cos(std::numbers::pi * (t - on_time) / ramp));
  return omega_c_peak;
}

ControlSchedule ControlSchedule::storage(double omega_c, double off_time, double storage_time, double ramp) {
  return {omega_c, off_time, off_time + storage_time, ramp, ControlShape::RaisedCosine};
}

ControlSchedule ControlSchedule::always_on(double omega_c) {
  return {omega_c, 0.0, 0.0, 0.0, ControlShape::AlwaysOn};
}

Complex ProbePulse::envelope(double t) const {
  const double u = (t - center_time) / width;
  return std::exp(-2.0 * std::numbers::ln2 * u * u);
}

double max_stable_time_step(const MediumParams& medium, double optical_depth, double omega_c_peak) {
  const double g = medium.linewidth();
  const double rate = 0.5 + medium.gamma_s / g + std::abs(medium.one_photon_detuning) / g +
                      std::abs(medium.two_photon_detuning) / g + 0.5 * std::abs(omega_c_peak) / g +
                      0.25 * optical_depth;
  return kStabilityConstant / rate;
}

StorageResult simulate_storage(const MediumParams& medium, const ControlSchedule& control, const ProbePulse& probe,
                               int l, double storage_time, const SolverSettings& settings) {
  if (medium.cells < 50) {
    throw ParameterError("medium needs at least 50 spatial cells");
  }
  if (!(medium.gamma_s >= 0.0)) {
    throw ParameterError("spin-wave decoherence rate must be non-negative");
  }
  if (!(control.omega_c_peak > 0.0)) {
    throw ParameterError("control Rabi frequency must be positive");
  }
  if (!(probe.width > 0.0) || !(probe.peak_rabi > 0.0)) {
    throw ParameterError("probe needs positive width and peak Rabi frequency");
  }
  if (probe.peak_rabi / control.omega_c_peak >= kWeakProbeLimit) {
    std::ostringstream msg;
    msg << "weak-probe regime violated: probe/control Rabi ratio " << probe.peak_rabi / control.omega_c_peak
        << " >= " << kWeakProbeLimit;
    throw RegimeError(msg.str());
  }
  const bool stores = control.shape == ControlShape::RaisedCosine;
  if (stores) {
    if (!(control.ramp > 0.0) || !(control.off_time < control.on_time)) {
      throw ParameterError("control schedule needs ramp > 0 and off_time < on_time");
    }
    if (std::abs(control.storage_time() - storage_time) > 1e-9 * std::max(1e-6, storage_time)) {
      throw ParameterError("storage_time disagrees with the control schedule (on_time - off_time)");
    }
  }

  const double g = medium.linewidth();
  const double depth = effective_od(medium.optical_depth, std::abs(l), medium.od_model);
  const double dt = settings.time_step;
  const double dt_max = max_stable_time_step(medium, depth, control.omega_c_peak);
  if (!(dt > 0.0) || dt > dt_max) {
    std::ostringstream msg;
    msg << "time step " << dt << "/Gamma exceeds the RK4 stability bound " << dt_max << "/Gamma";
    throw SolverError(msg.str(), dt_max);
  }

  // Dimensionless: time in 1/Gamma, rates in Gamma, z in medium lengths.
  const double oc_peak = control.omega_c_peak / g;
  const double delay = depth / (oc_peak * oc_peak);
  const double width = probe.width * g;
  const double center = probe.center_time * g;
  double t_end = 0.0;
  if (settings.end_time) {
    t_end = *settings.end_time * g;
  } else if (stores) {
    t_end = (control.on_time + control.ramp) * g + 4.0 * delay + 4.0 * width;
  } else {
    t_end = center + 4.0 * delay + 4.0 * width;
  }
  const double retrieval_start = stores ? control.on_time * g : std::numeric_limits<double>::infinity();

  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt));
  const int nz = medium.cells;
  const double dz = 1.0 / nz;
  const Complex i_unit{0.0, 1.0};
  const double half_depth = 0.5 * depth;
  const Complex decay31{0.5, -medium.one_photon_detuning / g};
  const Complex decay21{medium.gamma_s / g, -medium.two_photon_detuning / g};

  std::vector<Complex> p31(nz + 1), p21(nz + 1);
  std::vector<Complex> k31[4], k21[4];
  for (int s = 0; s < 4; ++s) {
    k31[s].resize(nz + 1);
    k21[s].resize(nz + 1);
  }
  std::vector<Complex> s31(nz + 1), s21(nz + 1), field(nz + 1);

  // Probe amplitude normalised to peak_rabi; the system is linear in it.
  auto input_at = [&](double t) { return probe.envelope(t / g); };
  auto control_at = [&](double t) { return control.rabi_at(t / g) / g; };

  auto propagate = [&](double t, const std::vector<Complex>& r31) {
    Complex running{0.0, 0.0};
    const Complex in = input_at(t);
    field[0] = in;
    for (int j = 1; j <= nz; ++j) {
      running += 0.5 * dz * (r31[j - 1] + r31[j]);
      field[j] = in + i_unit * half_depth * running;
    }
  };
  auto rhs = [&](double t, const std::vector<Complex>& r31, const std::vector<Complex>& r21,
                 std::vector<Complex>& d31, std::vector<Complex>& d21) {
    propagate(t, r31);
    const double oc = control_at(t);
    for (int j = 0; j <= nz; ++j) {
      d31[j] = 0.5 * i_unit * field[j] + 0.5 * i_unit * oc * r21[j] - decay31 * r31[j];
      d21[j] = 0.5 * i_unit * oc * r31[j] - decay21 * r21[j];
    }
  };

  StorageResult result;
  result.l = l;
  result.optical_depth = depth;
  result.linewidth = g;
  result.time_step = dt / g;
  result.retrieval_start = stores ? control.on_time : std::numeric_limits<double>::infinity();
  result.t_axis.reserve(steps + 1);
  result.output_field.reserve(steps + 1);

  auto record = [&](double t) {
    propagate(t, p31);
    result.t_axis.push_back(t / g);
    result.output_field.push_back(field[nz]);
  };
  const double snapshot_time = stores ? control.off_time * g : std::numeric_limits<double>::infinity();
  bool snapped = false;

  record(0.0);
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    rhs(t, p31, p21, k31[0], k21[0]);
    for (int j = 0; j <= nz; ++j) {
      s31[j] = p31[j] + 0.5 * dt * k31[0][j];
      s21[j] = p21[j] + 0.5 * dt * k21[0][j];
    }
    rhs(t + 0.5 * dt, s31, s21, k31[1], k21[1]);
    for (int j = 0; j <= nz; ++j) {
      s31[j] = p31[j] + 0.5 * dt * k31[1][j];
      s21[j] = p21[j] + 0.5 * dt * k21[1][j];
    }
    rhs(t + 0.5 * dt, s31, s21, k31[2], k21[2]);
    for (int j = 0; j <= nz; ++j) {
      s31[j] = p31[j] + dt * k31[2][j];
      s21[j] = p21[j] + dt * k21[2][j];
    }
    rhs(t + dt, s31, s21, k31[3], k21[3]);
    for (int j = 0; j <= nz; ++j) {
      p31[j] += dt / 6.0 * (k31[0][j] + 2.0 * k31[1][j] + 2.0 * k31[2][j] + k31[3][j]);
      p21[j] += dt / 6.0 * (k21[0][j] + 2.0 * k21[1][j] + 2.0 * k21[2][j] + k21[3][j]);
    }
    const double t_next = static_cast<double>(n + 1) * dt;
    if (!snapped && t_next >= snapshot_time) {
      result.spinwave_snapshot = p21;
      snapped = true;
    }
    record(t_next);
  }
  for (const auto& v : p31) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw SolverError("solver diverged (non-finite coherence)", dt_max);
    }
  }

  const std::size_t count = result.t_axis.size();
  result.input_trace.resize(count);
  result.output_trace.resize(count);
  result.leak_trace.assign(count, 0.0);
  result.retrieved_trace.assign(count, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = result.t_axis[k] * g;
    result.input_trace[k] = std::norm(input_at(t));
    result.output_trace[k] = std::norm(result.output_field[k]);
    if (t >= retrieval_start) {
      result.retrieved_trace[k] = result.output_trace[k];
    } else {
      result.leak_trace[k] = result.output_trace[k];
    }
  }
  const double input_energy = rect_sum(result.input_trace);
  result.efficiency = rect_sum(result.retrieved_trace) / input_energy;
  result.leakage = rect_sum(result.leak_trace) / input_energy;

  if (result.efficiency > 0.0) {
    const double shift = centroid(result.t_axis, result.retrieved_trace) - probe.center_time;
    std::vector<Complex> terms(count);
    for (std::size_t k = 0; k < count; ++k) {
      if (result.retrieved_trace[k] > 0.0) {
        terms[k] = result.output_field[k] * std::conj(probe.envelope(result.t_axis[k] - shift));
      }
    }
    const Complex overlap = compensated_sum(terms);
    if (std::abs(overlap) > 0.0) {
      result.retrieval_amp = std::sqrt(result.efficiency) * overlap / std::abs(overlap);
    }
  }
  return result;
}

double storage_efficiency(std::span<const double> input_trace, std::span<const double> retrieved_trace) {
  if (input_trace.size() != retrieved_trace.size()) {
    throw ParameterError("traces must share one time axis");
  }
  auto support = [](std::span<const double> v) -> std::pair<std::size_t, std::size_t> {
    const double peak = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
    if (!(peak > 0.0)) return {1, 0};
    std::size_t first = v.size();
    std::size_t last = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v[k] > kSupportFraction * peak) {
        first = std::min(first, k);
        last = k;
      }
    }
    return {first, last};
  };
  const auto [in_first, in_last] = support(input_trace);
  if (in_first > in_last) {
    throw ParameterError("input trace carries no energy");
  }
  const auto [re_first, re_last] = support(retrieved_trace);
  if (re_first <= re_last && re_first <= in_last && in_first <= re_last) {
    throw WindowingError("retrieval window overlaps the input window");
  }
  return rect_sum(retrieved_trace) / rect_sum(input_trace);
}

double retrieval_phase(const StorageResult& result) {
  if (!(result.efficiency > 0.0) || std::abs(result.retrieval_amp) == 0.0) {
    throw UndefinedPhaseError("retrieval phase undefined: nothing was retrieved");
  }
  return std::arg(result.retrieval_amp);
}

double group_delay(const StorageResult& result) {
  return centroid(result.t_axis, result.output_trace) - centroid(result.t_axis, result.input_trace);
}

double energy_balance(const StorageResult& result) {
  return (rect_sum(result.leak_trace) + rect_sum(result.retrieved_trace)) / rect_sum(result.input_trace);
}

void write_storage_csv(std::ostream& out, const StorageResult& result) {
  out << "t_us,input,leak,retrieved\n";
  out.precision(12);
  for (std::size_t k = 0; k < result.t_axis.size(); ++k) {
    out << result.t_axis[k] * 1e6 << ',' << result.input_trace[k] << ',' << result.leak_trace[k] << ','
        << result.retrieved_trace[k] << '\n';
  }
}

nlohmann::json to_json(const StorageResult& result) {
  nlohmann::json j{
      {"l", result.l},
      {"optical_depth", result.optical_depth},
      {"efficiency", result.efficiency},
      {"leakage", result.leakage},
      {"retrieval_amp", {result.retrieval_amp.real(), result.retrieval_amp.imag()}},
      {"time_step_s", result.time_step},
      {"samples", result.t_axis.size()},
  };
  j["retrieval_phase"] = result.efficiency > 0.0 && std::abs(result.retrieval_amp) > 0.0
                             ? nlohmann::json(std::arg(result.retrieval_amp))
                             : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const MediumParams& medium) {
  nlohmann::json od;
  switch (medium.od_model.kind) {
    case OdModel::Kind::InverseOrder:
      od = {{"kind", "inverse_order"}};
      break;
    case OdModel::Kind::Power:
      od = {{"kind", "power"}, {"exponent", medium.od_model.exponent}};
      break;
    case OdModel::Kind::Table:
      od = {{"kind", "table"}, {"table", medium.od_model.table}};
      break;
  }
  return {{"optical_depth", medium.optical_depth},
          {"linewidth_rad_s", medium.linewidth()},
          {"gamma_s_rad_s", medium.gamma_s},
          {"cells", medium.cells},
          {"od_model", od},
          {"one_photon_detuning_rad_s", medium.one_photon_detuning},
          {"two_photon_detuning_rad_s", medium.two_photon_detuning}};
}

nlohmann::json to_json(const ControlSchedule& control) {
  return {{"omega_c_rad_s", control.omega_c_peak},
          {"off_time_s", control.off_time},
          {"on_time_s", control.on_time},
          {"ramp_s", control.ramp},
          {"shape", control.shape == ControlShape::AlwaysOn ? "always_on" : "raised_cosine"}};
}

nlohmann::json to_json(const ProbePulse& probe) {
  return {{"peak_rabi_rad_s", probe.peak_rabi}, {"width_s", probe.width}, {"center_time_s", probe.center_time}};
}

}  // namespace skyrmem
