#pragma once

// Charge-qubit dispersion, cavity-qubit spectroscopy and Purcell decay.
//
// Frequencies are in Hz. Rates and couplings (kappa, gamma, g) are angular,
// in rad/s; use qnl::to_angular / qnl::to_hz at the boundary.

#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace qnl::spectro {

/// Hyperbolic qubit spectrum f_q(V) = sqrt(f_ss^2 + (lever_c (V - v_ss))^2).
struct QubitDispersion {
  double f_ss = 0.0;     // Hz
  double lever_c = 0.0;  // Hz/V
  double v_ss = 0.0;     // V

  void validate() const;

  bool operator==(const QubitDispersion&) const = default;
};

struct CavityQubitParams {
  double f_r = 0.0;    // Hz
  double kappa = 0.0;  // rad/s
  double f_q = 0.0;    // Hz
  double gamma = 0.0;  // rad/s
  double g = 0.0;      // rad/s

  void validate() const;
};

/// dv is the offset from the sweet spot, V - v_ss.
double qubit_frequency(const QubitDispersion& disp, double dv);

/// d f_q / dV in Hz/V.
double lever_arm(const QubitDispersion& disp, double dv);

/// Offset |dv| >= 0 at which the qubit sits `detune` Hz above f_ss.
double offset_for_detuning(const QubitDispersion& disp, double detune);

struct VoltagePoint {
  double voltage = 0.0;  // V
  double freq = 0.0;     // Hz
};

struct DispersionFit {
  QubitDispersion params;
  double f_ss_err = 0.0;
  double lever_c_err = 0.0;
  double v_ss_err = 0.0;
  double residual_norm = 0.0;  // Hz
  double initial_residual_norm = 0.0;
  double rms_residual = 0.0;   // Hz

  bool operator==(const DispersionFit&) const = default;
};

DispersionFit fit_dispersion(const std::vector<VoltagePoint>& points);

struct DressedFrequencies {
  double upper = 0.0;  // Hz
  double lower = 0.0;  // Hz
  double splitting() const { return upper - lower; }
};

DressedFrequencies dressed_frequencies(const CavityQubitParams& p);

/// Complex transmission normalized so the bare resonator peaks at 1.
std::complex<double> transmission(const CavityQubitParams& p, double f_probe);

struct SpectrumPoint {
  double freq = 0.0;  // Hz
  double amp = 0.0;   // linear, normalized
};

struct KnownResonator {
  double f_r = 0.0;    // Hz
  double kappa = 0.0;  // rad/s
};

struct TransmissionFit {
  double g = 0.0;      // rad/s
  double gamma = 0.0;  // rad/s
  double f_q = 0.0;    // Hz
  double g_err = 0.0;
  double gamma_err = 0.0;
  double f_q_err = 0.0;
  double residual_norm = 0.0;
  double initial_residual_norm = 0.0;
  bool resolved = true;  // false when only one transmission peak was found
  std::vector<std::string> warnings;

  bool operator==(const TransmissionFit&) const = default;
};

TransmissionFit fit_transmission(const std::vector<SpectrumPoint>& trace,
                                 const KnownResonator& known);

/// Gamma_r = kappa g^2 / Delta^2 (all angular), in 1/s.
double purcell_rate(const CavityQubitParams& p);

}  // namespace qnl::spectro
