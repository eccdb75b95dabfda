#pragma once

// Noise spectral densities: CPMG-based reconstruction, voltage-referred
// conversion, transverse noise from T1, power-law fits, Ramsey-fringe FFTs
// and periodograms of slow frequency drift.

#include "qnl/ddfilter.hpp"
#include "qnl/decayfit.hpp"

#include <string>
#include <vector>

namespace qnl::noisespec {

enum class PsdUnits { freq_noise, voltage_noise };  // Hz^2/Hz, uV^2/Hz

std::string to_string(PsdUnits u);
PsdUnits psd_units_from_string(const std::string& s);

struct PSDPoint {
  double freq = 0.0;  // Hz
  double value = 0.0;
  PsdUnits units = PsdUnits::freq_noise;

  bool operator==(const PSDPoint&) const = default;
};

struct NoiseSource {
  std::string name;
  double sensitivity = 0.0;  // d omega_q / d lambda, rad/s per unit
};

struct FrequencySeries {
  std::vector<double> timestamps;  // s
  std::vector<double> freqs;       // Hz

  void validate() const;
};

/// S(2 pi f_N) = 1 / (T_phi^2 g_N(2 pi f_N, T_phi) d omega_N), with the filter
/// evaluated at a total free-evolution time equal to T_phi. Only the pulse
/// count and pulse width of `seq` are used.
PSDPoint reconstruct_psd_point(double t_phi, const ddfilter::PulseSequence& seq);

/// S_v = S_f / (df_q/dV)^2; lever in Hz/V, result in uV^2/Hz.
PSDPoint to_voltage_noise(const PSDPoint& p, double lever);

/// 1/T1 = (pi/2) S(2 pi f_q)  =>  S = 2 / (pi T1).
PSDPoint transverse_noise(double t1, double f_q);

struct PowerLawFit {
  double amplitude = 0.0;  // S at 1 Hz
  double exponent = 0.0;   // alpha in S = A / f^alpha
  double amplitude_err = 0.0;
  double exponent_err = 0.0;

  bool operator==(const PowerLawFit&) const = default;
};

PowerLawFit powerlaw_fit(const std::vector<PSDPoint>& points);

struct SpectralLine {
  double freq = 0.0;  // Hz
  double power = 0.0;
};

struct RamseySpectrum {
  std::vector<SpectralLine> spectrum;  // one-sided, k = 1 .. n/2
  std::vector<SpectralLine> peaks;     // local maxima >= 20 % of the top bin, by power
};

RamseySpectrum ramsey_fft(const decayfit::DecayTrace& trace);

/// One-sided, unwindowed periodogram on f_k = k/(n dt), k = 1..n/2, scaled so
/// sum(PSD) * df equals the variance of the mean-subtracted series.
std::vector<PSDPoint> periodogram(const FrequencySeries& series);

}  // namespace qnl::noisespec
