#pragma once

// Coherence-decay models and fits: relaxation, Ramsey fringes, CPMG/echo with
// a stretched pure-dephasing exponent, and the T_phi ~ N^beta scaling law.

#include "qnl/error.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qnl::decayfit {

enum class TraceKind { relaxation, ramsey, echo, cpmg };

std::string to_string(TraceKind kind);
TraceKind trace_kind_from_string(const std::string& s);

struct DecayTrace {
  std::vector<double> times;        // s, strictly increasing
  std::vector<double> populations;  // P_e
  TraceKind kind = TraceKind::relaxation;
  int n_pulses = 0;  // N for cpmg; 1 for echo

  /// Throws InputError on hard violations: unequal lengths, empty trace,
  /// non-finite values, times not strictly increasing.
  void validate() const;
  /// Row indices whose P_e lies outside the [-0.1, 1.1] noise tolerance.
  std::vector<std::size_t> out_of_range_rows() const;
};

struct CoherenceFit {
  std::optional<double> t1;        // s
  double t2 = 0.0;                 // s, 1/e time of the total coherence envelope
  std::optional<double> t_phi;     // s
  double stretch = 1.0;            // exponent of the dephasing term (alpha + 1)
  double amplitude = 0.0;          // a, with exp(-chi_P) folded in
  double offset = 0.0;             // P_0
  std::optional<double> detuning;  // Hz, Ramsey only
  double phase = 0.0;              // rad, Ramsey only

  double t1_err = 0.0;
  double t2_err = 0.0;
  double t_phi_err = 0.0;
  double stretch_err = 0.0;
  double amplitude_err = 0.0;
  double offset_err = 0.0;
  double detuning_err = 0.0;

  double residual_norm = 0.0;
  double initial_residual_norm = 0.0;

  bool low_confidence = false;           // relaxation: T1 far beyond the sampled window
  bool detuning_unconstrained = false;   // Ramsey: no oscillation found
  bool stretch_at_bound = false;         // CPMG: exponent pinned at 0.5 or 4
  std::vector<std::string> warnings;

  bool operator==(const CoherenceFit&) const = default;
};

inline constexpr double kStretchMin = 0.5;
inline constexpr double kStretchMax = 4.0;

/// P_e(t) = p0 + a exp(-t/T1).
CoherenceFit fit_relaxation(const DecayTrace& trace);

/// P_e(t) = p0 + a exp(-t/T2*) cos(2 pi detuning t + phase).
CoherenceFit fit_ramsey(const DecayTrace& trace);

/// P_e = p0 + a exp(-tau/2T1) exp(-(tau/T_phi)^stretch). Pass infinity for
/// t1 (or t_phi) to drop that factor.
double cpmg_decay_model(const CoherenceFit& fit, double t1, double tau);

/// Fits (p0, a, T_phi, stretch) with T1 fixed; t2 is T_2^CPMG.
CoherenceFit fit_cpmg(const DecayTrace& trace, double t1);

/// Solves tau/(2 T1) + (tau/T_phi)^stretch = 1 by bisection.
double t2_cpmg(double t1, double t_phi, double stretch);

struct ScalingFit {
  double beta = 0.0;
  double alpha = 0.0;
  double beta_err = 0.0;
  double alpha_err = 0.0;
  double prefactor = 0.0;  // T_phi(N=1), s

  bool operator==(const ScalingFit&) const = default;
};

/// Thrown when the fitted beta falls outside (0, 1), where alpha is not a
/// positive finite exponent. Carries the fitted beta.
class ScalingError : public FitError {
 public:
  explicit ScalingError(double beta);
  double beta() const { return beta_; }

 private:
  double beta_;
};

struct ScalingPoint {
  int n_pulses = 0;
  double t_phi = 0.0;
};

/// log T_phi = log c + beta log N, then alpha = beta / (1 - beta).
ScalingFit fit_scaling(const std::vector<ScalingPoint>& points);

double alpha_from_beta(double beta);
double beta_from_alpha(double alpha);

}  // namespace qnl::decayfit
