#pragma once

// CPMG filter functions g_N(omega, tau) = |y_N|^2 / (omega tau)^2 with
//   y_N = 1 + (-1)^(N+1) e^{i omega tau}
//       + 2 sum_{j=1..N} (-1)^j e^{i omega tau (j - 1/2)/N} cos(omega tau_pi / 2).

#include <span>
#include <vector>

namespace qnl::ddfilter {

struct PulseSequence {
  int n_pulses = 0;
  double tau = 0.0;     // total free evolution, s
  double tau_pi = 0.0;  // pi-pulse duration, s

  void validate() const;
};

struct FilterPeak {
  double f_peak = 0.0;       // Hz
  double delta_omega = 0.0;  // FWHM, rad/s
  double g_peak = 0.0;       // g_N at the maximum
};

/// g_N(omega, tau); omega in rad/s. omega = 0 uses the series limit.
double filter_value(const PulseSequence& seq, double omega);

/// First-harmonic maximum near N/(2 tau) and its full width at half maximum.
FilterPeak first_harmonic_peak(const PulseSequence& seq);

/// g_N on a grid of angular frequencies (OpenMP-parallel).
std::vector<double> filter_scan(const PulseSequence& seq, std::span<const double> omegas);

/// Serial reference for filter_scan; identical results.
std::vector<double> filter_scan_serial(const PulseSequence& seq, std::span<const double> omegas);

}  // namespace qnl::ddfilter
