#pragma once

// Synthetic Q1-like dataset with known ground truth, for pipeline runs and tests.

#include <cstdint>
#include <filesystem>
#include <vector>

namespace qnl::fixture {

struct Q1Truth {
  double f_ss = 5.065e9;          // Hz
  double lever_c = 2.348e12;      // Hz/V
  double f_r = 5.668e9;           // Hz
  double kappa_2pi = 0.38e6;      // Hz
  double chi_over_pi = -0.12e6;   // Hz
  double g_2pi = 6.43e6;          // Hz
  double gamma_2pi = 3.18e6;      // Hz
  double t1 = 11.6e-6;            // s
  double t2_star = 8.2e-6;        // s
  double ramsey_detuning = 0.5e6; // Hz
  double t2_echo = 21.6e-6;       // s
  double alpha = 1.56;            // charge-noise exponent at the biased point
  double t_phi_echo_bias = 3e-6;  // s, sets the noise amplitude
  double bias_detuning = 15.9e6;  // Hz above f_ss
  double drift_alpha = 1.11;
  std::vector<int> pulse_counts{1, 2, 4, 8, 16};
  std::size_t n_traj = 1000;
};

/// Writes traces, sidecars, spectra, a drift series and `config.json` into
/// `dir`. Returns the config path. Deterministic in `seed`.
std::filesystem::path write_q1_fixture(const std::filesystem::path& dir, std::uint64_t seed,
                                       const Q1Truth& truth = {});

}  // namespace qnl::fixture
