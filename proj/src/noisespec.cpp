#include "qnl/noisespec.hpp"

#include "qnl/error.hpp"
#include "qnl/fft.hpp"
#include "qnl/units.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace qnl::noisespec {

std::string to_string(PsdUnits u) {
  return u == PsdUnits::freq_noise ? "freq_noise" : "voltage_noise";
}

PsdUnits psd_units_from_string(const std::string& s) {
  if (s == "freq_noise") return PsdUnits::freq_noise;
  if (s == "voltage_noise") return PsdUnits::voltage_noise;
  throw InputError("unknown PSD units '" + s + "'");
}

namespace {

// Mean spacing, or throws if any step deviates by more than 1 %.
double uniform_step(const std::vector<double>& t, const char* who) {
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(dt > 0.0)) throw InputError(std::string(who) + ": time axis not increasing");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs((t[i] - t[i - 1]) - dt) > 0.01 * dt)
      throw InputError(std::string(who) + ": non-uniform time grid at row " + std::to_string(i));
  return dt;
}

std::vector<double> demeaned(const std::vector<double>& x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [mean](double v) { return v - mean; });
  return out;
}

}  // namespace

void FrequencySeries::validate() const {
  if (timestamps.size() != freqs.size())
    throw InputError("FrequencySeries: timestamps and freqs differ in length");
  if (timestamps.size() < 8) throw InputError("FrequencySeries: need at least 8 samples");
  uniform_step(timestamps, "FrequencySeries");
}

PSDPoint reconstruct_psd_point(double t_phi, const ddfilter::PulseSequence& seq) {
  if (!(t_phi > 0.0)) throw DomainError("reconstruct_psd_point: T_phi must be > 0");
  if (seq.n_pulses < 1) throw DomainError("reconstruct_psd_point: needs N >= 1");
  const ddfilter::PulseSequence at_tphi{seq.n_pulses, t_phi, seq.tau_pi};
  const auto peak = ddfilter::first_harmonic_peak(at_tphi);
  const double value = 1.0 / (t_phi * t_phi * peak.g_peak * peak.delta_omega);
  return {peak.f_peak, value, PsdUnits::freq_noise};
}

PSDPoint to_voltage_noise(const PSDPoint& p, double lever) {
  if (p.units != PsdUnits::freq_noise)
    throw DomainError("to_voltage_noise: input must be frequency noise");
  if (lever == 0.0)
    throw DomainError("to_voltage_noise: zero lever arm (sweet spot), conversion undefined");
  constexpr double kV2ToUv2 = 1e12;
  return {p.freq, p.value / (lever * lever) * kV2ToUv2, PsdUnits::voltage_noise};
}

PSDPoint transverse_noise(double t1, double f_q) {
  if (!(t1 > 0.0)) throw DomainError("transverse_noise: T1 must be > 0");
  return {f_q, 2.0 / (std::numbers::pi * t1), PsdUnits::freq_noise};
}

PowerLawFit powerlaw_fit(const std::vector<PSDPoint>& points) {
  if (points.size() < 3) throw FitError("powerlaw_fit: need at least 3 points");
  const double m = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& p : points) {
    if (!(p.value > 0.0)) throw FitError("powerlaw_fit: non-positive PSD value (log undefined)");
    if (!(p.freq > 0.0)) throw FitError("powerlaw_fit: non-positive frequency");
    sx += std::log(p.freq);
    sy += std::log(p.value);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(p.freq) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(p.value) - my);
  }
  if (!(sxx > 0.0)) throw FitError("powerlaw_fit: frequencies must be distinct");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (const auto& p : points) {
    const double e = std::log(p.value) - (intercept + slope * std::log(p.freq));
    ssr += e * e;
  }
  const double s2 = m > 2.0 ? ssr / (m - 2.0) : 0.0;
  double sumx2 = 0.0;
  for (const auto& p : points) sumx2 += std::log(p.freq) * std::log(p.freq);

  PowerLawFit out;
  out.exponent = -slope;
  out.amplitude = std::exp(intercept);
  out.exponent_err = std::sqrt(s2 / sxx);
  out.amplitude_err = out.amplitude * std::sqrt(s2 * sumx2 / (m * sxx));
  return out;
}

RamseySpectrum ramsey_fft(const decayfit::DecayTrace& trace) {
  trace.validate();
  if (trace.times.size() < 16) throw InputError("ramsey_fft: need at least 16 points");
  const double dt = uniform_step(trace.times, "ramsey_fft");
  const std::size_t n = trace.times.size();
  const auto x = demeaned(trace.populations);
  const auto spec = fft::rfft(x);

  RamseySpectrum out;
  const double df = 1.0 / (static_cast<double>(n) * dt);
  for (std::size_t k = 1; k < spec.size(); ++k)
    out.spectrum.push_back({k * df, std::norm(spec[k]) / static_cast<double>(n * n)});

  double top = 0.0;
  for (const auto& l : out.spectrum) top = std::max(top, l.power);
  // Rounding residue of a constant signal is not a tone.
  double energy = 0.0;
  for (double v : trace.populations) energy += v * v;
  if (top <= 1e-24 * std::max(energy, 1e-300) || top == 0.0) return out;

  const auto& s = out.spectrum;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool left = i == 0 || s[i].power > s[i - 1].power;
    const bool right = i + 1 == s.size() || s[i].power >= s[i + 1].power;
    if (left && right && s[i].power >= 0.2 * top) out.peaks.push_back(s[i]);
  }
  std::sort(out.peaks.begin(), out.peaks.end(),
            [](const SpectralLine& a, const SpectralLine& b) { return a.power > b.power; });
  return out;
}

std::vector<PSDPoint> periodogram(const FrequencySeries& series) {
  series.validate();
  const std::size_t n = series.timestamps.size();
  const double dt = uniform_step(series.timestamps, "periodogram");
  const double df = 1.0 / (static_cast<double>(n) * dt);
  const auto x = demeaned(series.freqs);
  const auto spec = fft::rfft(x);

  std::vector<PSDPoint> out;
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n) * df);
  for (std::size_t k = 1; k <= n / 2; ++k) {
    // The Nyquist bin has no mirror image when n is even.
    const double fold = (n % 2 == 0 && k == n / 2) ? 1.0 : 2.0;
    out.push_back({k * df, fold * std::norm(spec[k]) * norm, PsdUnits::freq_noise});
  }
  return out;
}

}  // namespace qnl::noisespec
