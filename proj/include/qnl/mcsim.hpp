#pragma once

// Monte Carlo dephasing oracle.
//
// Noise convention: SyntheticNoise::amplitude is the one-sided PSD of the
// noise source lambda in units^2/Hz at 1 Hz, S1(f) = A / f^alpha. The filter
// integral uses the symmetric angular density S(omega) = S1(omega/2pi) / (4 pi),
// for which chi_N = <phi^2>/2 exactly. Reconstructed spectra are expressed in
// the same convention (see angular_psd).

#include "qnl/ddfilter.hpp"
#include "qnl/decayfit.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qnl::mcsim {

struct SyntheticNoise {
  double amplitude = 0.0;  // units^2/Hz at 1 Hz
  double alpha = 0.0;
  double f_min = 0.0;  // Hz
  double f_max = 0.0;  // Hz
  std::uint64_t seed = 0;

  void validate() const;
};

struct Trajectory {
  double dt = 0.0;
  std::vector<double> samples;
  bool band_clipped = false;  // requested band exceeded the record's Fourier grid
};

/// Spectral synthesis: independent Gaussian quadratures per Fourier mode with
/// variance S1(f_k) df, inverse transformed. `stream` selects an independent
/// random stream derived from (seed, stream).
Trajectory synthesize_noise(const SyntheticNoise& spec, double dt, std::size_t n,
                            std::uint64_t stream = 0);

struct SimulationResult {
  decayfit::DecayTrace trace;        // P_e = (1 + coherence) / 2
  std::vector<double> coherence;     // |<exp(i phi)>|
  std::vector<double> mean_phase_sq; // <phi^2>
  std::size_t record_length = 0;     // samples per noise realization
  bool band_clipped = false;
};

/// Evolves n_traj noise realizations through the sequence for every total
/// delay in `tau_grid` (seq.tau is ignored unless the grid is empty). Each
/// trajectory draws from stream (seed, index), so results do not depend on
/// the number of threads. OpenMP-parallel over trajectories.
SimulationResult simulate_sequence(const SyntheticNoise& spec, const ddfilter::PulseSequence& seq,
                                   std::span<const double> tau_grid, double sensitivity,
                                   std::size_t n_traj, double dt);

/// Serial reference for simulate_sequence; bit-identical output.
SimulationResult simulate_sequence_serial(const SyntheticNoise& spec,
                                          const ddfilter::PulseSequence& seq,
                                          std::span<const double> tau_grid, double sensitivity,
                                          std::size_t n_traj, double dt);

struct QuadratureOptions {
  double resolution = 1.0;  // panel density multiplier; 2 doubles every panel count
  double rel_tol = 1e-10;
};

/// chi_N(tau) = tau^2 s^2 int S(omega) g_N(omega, tau) d omega over the band.
double dephasing_integral(const SyntheticNoise& psd, const ddfilter::PulseSequence& seq,
                          double sensitivity, const QuadratureOptions& options = {});

/// s^2 S1(f) / (4 pi): the density that appears inside the filter integral,
/// i.e. what CPMG reconstruction recovers.
double angular_psd(const SyntheticNoise& psd, double sensitivity, double f);

/// Variance of lambda over the band, int S1 df.
double band_variance(const SyntheticNoise& psd);

/// Record length (power of two) used for a simulation with these parameters.
std::size_t record_length(const SyntheticNoise& spec, double tau_max, double dt);

}  // namespace qnl::mcsim
