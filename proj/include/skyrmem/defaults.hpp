#pragma once

// Physical and numerical defaults shared by the library, the scenario runner
// and the CLI. Values marked "experiment" are the lab settings this simulator
// mirrors; the rest are modelling or numerical choices.

#include <array>
#include <cmath>
#include <numbers>

namespace skyrmem::defaults {

// Natural linewidth of the Rb D1 line (2 pi x 5.75 MHz), rad/s.
inline constexpr double kLinewidth = 2.0 * std::numbers::pi * 5.75e6;

// Effective optical depth of the fundamental mode.
inline constexpr double kOpticalDepth = 100.0;

// Probe: Gaussian, 0.5 us intensity FWHM (experiment), centred 2.5 FWHM after
// t = 0 so the leading tail starts below 1e-7 of peak.
inline constexpr double kPulseWidth = 0.5e-6;
inline constexpr double kPulseCenterWidths = 2.5;
// Probe peak Rabi frequency as a fraction of the control peak.
inline constexpr double kProbeFraction = 0.01;

// Control: raised-cosine switching over 0.1 us. The control finishes
// switching off 2.2 FWHM after the probe peak, once the pulse has fully
// entered the fundamental-mode path.
inline constexpr double kRamp = 0.1e-6;
inline constexpr double kControlOffDelayWidths = 2.2;

// Control power to Rabi frequency: Omega_c proportional to sqrt(P), anchored
// at 53 mW <-> 48.3e6 rad/s (experiment). 33 mW is the experiment's working
// power for the storage-time study.
inline constexpr double kAnchorPowerMw = 53.0;
inline constexpr double kAnchorRabi = 48.3e6;
inline constexpr double kControlPowerMw = 33.0;

inline double rabi_from_power(double power_mw) { return kAnchorRabi * std::sqrt(power_mw / kAnchorPowerMw); }
inline double power_from_rabi(double rabi) {
  const double ratio = rabi / kAnchorRabi;
  return kAnchorPowerMw * ratio * ratio;
}

// Storage times of the decay study (experiment), s.
inline constexpr std::array<double, 3> kStorageTimes = {0.5e-6, 1.5e-6, 2.5e-6};

// Control-power sweep, mW. Spans 0.45 to 1.59 Gamma in Rabi frequency,
// more than 100% relative change around the 33 mW working point.
inline constexpr std::array<double, 7> kPowerSweepMw = {6.0, 10.0, 18.0, 33.0, 45.0, 53.0, 75.0};

// Spin-wave decoherence giving an intensity efficiency that halves every
// microsecond: 2 gamma_s * 1 us = ln 2.
inline constexpr double kHalvingGammaS = 0.5 * std::numbers::ln2 / 1e-6;

// Solver resolution.
inline constexpr int kCells = 200;
inline constexpr double kTimeStep = 0.05;  // units of 1/Gamma

// Transverse grid and topology window, units of w0.
inline constexpr int kGridSamples = 256;
inline constexpr double kGridExtent = 6.0;
inline constexpr double kWindowRadius = 5.0;

}  // namespace skyrmem::defaults
