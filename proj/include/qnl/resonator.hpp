#pragma once

// Lumped-element description of a high-kinetic-inductance split resonator.

namespace qnl::resonator {

struct FilmParams {
  double t_c = 0.0;       // K
  double r_square = 0.0;  // Ohm per square
};

struct LumpedModel {
  double l_diff = 0.0;        // H
  double c_diff = 0.0;        // F
  double z_diff = 0.0;        // Ohm
  double f_diff = 0.0;        // Hz
  double l_per_length = 0.0;  // H/m
  double length = 0.0;        // m
  double width = 0.0;         // m
};

/// L_k = hbar R_sq / (pi Delta_0), Delta_0 = 1.76 k_B T_c. Returns H per square.
double kinetic_inductance(const FilmParams& film);

/// L_l = L_k / w, L_diff = 2 L_l l / pi^2, C_diff = 1/(omega^2 L_diff), Z = sqrt(L/C).
/// Mutual inductance between the two pins is neglected.
LumpedModel lumped_model(double l_k, double width, double length, double f_diff);

/// Expected coupling ratio g_a/g_b from g ~ omega_r sqrt(Z_r).
double coupling_ratio(double z_a, double f_a, double z_b, double f_b);

}  // namespace qnl::resonator
