#pragma once

#include <numbers>

// Temperature dependence of relaxation, thermal population and
// resonator-photon-induced dephasing.

namespace qnl::thermal {

struct ThermalModel {
  double f_q = 0.0;      // Hz
  double f_r = 0.0;      // Hz
  double kappa = 0.0;    // rad/s
  double chi = 0.0;      // rad/s, per-state dispersive pull
  double t1_zero = 0.0;  // s

  void validate() const;
};

/// Reported dispersive shifts are quoted as chi/pi (Hz); the model stores chi in rad/s.
constexpr double chi_from_reported(double chi_over_pi_hz) {
  return chi_over_pi_hz * std::numbers::pi;
}

/// chi ~ g^2 / Delta, for qubits where the shift was not measured. Angular in, angular out.
double chi_estimate(double g, double delta);

/// T1(T) = T1(0) tanh(h f_q / 2 k_B T).
double t1_vs_temperature(const ThermalModel& m, double temperature);

/// Two-level Boltzmann population 1 / (1 + exp(h f_q / k_B T)).
double thermal_population(double f_q, double temperature);

/// Inverse of thermal_population.
double electron_temperature(double p_e, double f_q);

/// Bose-Einstein occupation 1 / (exp(h f_r / k_B T) - 1).
double photon_occupation(double f_r, double temperature);

/// 1/T_phi = (kappa/2) Re[ sqrt((1 + 2i chi/kappa)^2 + 8i chi n_th / kappa) - 1 ].
double resonator_dephasing(const ThermalModel& m, double n_th);

}  // namespace qnl::thermal
