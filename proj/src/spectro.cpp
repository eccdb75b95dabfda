#include "qnl/spectro.hpp"

#include "qnl/error.hpp"
#include "qnl/lsq.hpp"
#include "qnl/units.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace qnl::spectro {

void QubitDispersion::validate() const {
  if (!(f_ss > 0.0)) throw DomainError("QubitDispersion: f_ss must be > 0");
  if (!(lever_c >= 0.0)) throw DomainError("QubitDispersion: lever_c must be >= 0");
}

void CavityQubitParams::validate() const {
  if (!(f_r > 0.0 && kappa > 0.0 && f_q > 0.0 && gamma > 0.0 && g > 0.0))
    throw DomainError("CavityQubitParams: all fields must be > 0");
}

double qubit_frequency(const QubitDispersion& disp, double dv) {
  return std::hypot(disp.f_ss, disp.lever_c * dv);
}

double lever_arm(const QubitDispersion& disp, double dv) {
  return disp.lever_c * disp.lever_c * dv / qubit_frequency(disp, dv);
}

double offset_for_detuning(const QubitDispersion& disp, double detune) {
  if (detune < 0.0) throw DomainError("offset_for_detuning: detuning below the sweet spot");
  if (disp.lever_c == 0.0) throw DomainError("offset_for_detuning: flat dispersion");
  const double fq = disp.f_ss + detune;
  return std::sqrt((fq - disp.f_ss) * (fq + disp.f_ss)) / disp.lever_c;
}

DispersionFit fit_dispersion(const std::vector<VoltagePoint>& points) {
  if (points.size() < 3) throw FitError("fit_dispersion: need at least 3 points");
  for (const auto& p : points)
    if (!(p.freq > 0.0)) throw FitError("fit_dispersion: frequencies must be > 0");

  const auto [vmin_it, vmax_it] = std::minmax_element(
      points.begin(), points.end(),
      [](const VoltagePoint& a, const VoltagePoint& b) { return a.voltage < b.voltage; });
  const double vspan = vmax_it->voltage - vmin_it->voltage;
  if (!(vspan > 0.0)) throw FitError("fit_dispersion: all points share one voltage (degenerate)");

  const auto fmin_it = std::min_element(
      points.begin(), points.end(),
      [](const VoltagePoint& a, const VoltagePoint& b) { return a.freq < b.freq; });
  const double f0 = fmin_it->freq;
  const double v0 = fmin_it->voltage;
  const double fmax =
      std::max_element(points.begin(), points.end(), [](const auto& a, const auto& b) {
        return a.freq < b.freq;
      })->freq;

  std::vector<double> slopes;
  for (const auto& p : points) {
    const double dv = std::abs(p.voltage - v0);
    if (dv > 1e-6 * vspan)
      slopes.push_back(std::sqrt(std::max(p.freq * p.freq - f0 * f0, 0.0)) / dv);
  }
  double c0 = 0.0;
  if (!slopes.empty()) {
    std::nth_element(slopes.begin(), slopes.begin() + slopes.size() / 2, slopes.end());
    c0 = slopes[slopes.size() / 2];
  }

  auto resid = [&](std::span<const double> x, std::span<double> r) {
    const QubitDispersion d{x[0], std::abs(x[1]), x[2]};
    for (std::size_t i = 0; i < points.size(); ++i)
      r[i] = qubit_frequency(d, points[i].voltage - d.v_ss) - points[i].freq;
  };

  lsq::Options opt;
  opt.scale = {f0, std::max(c0, fmax / vspan), vspan};
  const auto res = lsq::minimize(resid, points.size(), {f0, c0, v0}, {}, opt);

  DispersionFit out;
  out.params = {res.params[0], std::abs(res.params[1]), res.params[2]};
  out.f_ss_err = res.std_errors[0];
  out.lever_c_err = res.std_errors[1];
  out.v_ss_err = res.std_errors[2];
  out.residual_norm = res.residual_norm;
  out.initial_residual_norm = res.initial_residual_norm;
  out.rms_residual = res.residual_norm / std::sqrt(static_cast<double>(points.size()));
  return out;
}

DressedFrequencies dressed_frequencies(const CavityQubitParams& p) {
  const double mean = 0.5 * (p.f_r + p.f_q);
  const double half = 0.5 * std::hypot(p.f_r - p.f_q, 2.0 * to_hz(p.g));
  return {mean + half, mean - half};
}

std::complex<double> transmission(const CavityQubitParams& p, double f_probe) {
  using namespace std::complex_literals;
  const double w = to_angular(f_probe);
  const std::complex<double> qubit = 1i * (w - to_angular(p.f_q)) + p.gamma / 2.0;
  const std::complex<double> denom =
      1i * (w - to_angular(p.f_r)) + p.kappa / 2.0 + p.g * p.g / qubit;
  return (p.kappa / 2.0) / denom;
}

namespace {

struct Peak {
  std::size_t index;
  double freq;
  double amp;
};

// Local maxima of a lightly smoothed trace, tallest first.
std::vector<Peak> find_peaks(const std::vector<SpectrumPoint>& t, double rel_threshold) {
  const std::size_t n = t.size();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(n - 1, i + 1);
    double acc = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) acc += t[k].amp;
    s[i] = acc / static_cast<double>(hi - lo + 1);
  }
  const double top = *std::max_element(s.begin(), s.end());
  std::vector<Peak> peaks;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (s[i] >= s[i - 1] && s[i] > s[i + 1] && s[i] >= rel_threshold * top)
      peaks.push_back({i, t[i].freq, s[i]});
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.amp > b.amp; });

  // Merge maxima that are not separated by a real dip (noise wiggles on one peak).
  std::vector<Peak> kept;
  for (const auto& p : peaks) {
    bool distinct = true;
    for (const auto& k : kept) {
      const auto [a, b] = std::minmax(p.index, k.index);
      const double dip = *std::min_element(s.begin() + static_cast<std::ptrdiff_t>(a),
                                           s.begin() + static_cast<std::ptrdiff_t>(b) + 1);
      if (dip > 0.8 * std::min(p.amp, k.amp)) {
        distinct = false;
        break;
      }
    }
    if (distinct) kept.push_back(p);
  }
  return kept;
}

// Full width at half maximum around a peak, in Hz (one-sided widths doubled
// when a flank leaves the trace).
double peak_fwhm(const std::vector<SpectrumPoint>& t, const Peak& pk) {
  const double half = 0.5 * t[pk.index].amp;
  std::size_t lo = pk.index;
  while (lo > 0 && t[lo].amp > half) --lo;
  std::size_t hi = pk.index;
  while (hi + 1 < t.size() && t[hi].amp > half) ++hi;
  const double left = t[pk.index].freq - t[lo].freq;
  const double right = t[hi].freq - t[pk.index].freq;
  return std::min(left, right) * 2.0;
}

}  // namespace

TransmissionFit fit_transmission(const std::vector<SpectrumPoint>& trace,
                                 const KnownResonator& known) {
  if (trace.size() < 20) throw FitError("fit_transmission: need at least 20 points");
  if (!(known.f_r > 0.0 && known.kappa > 0.0))
    throw FitError("fit_transmission: known f_r and kappa must be > 0");
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (!(trace[i].freq > trace[i - 1].freq))
      throw FitError("fit_transmission: frequencies must be strictly increasing");

  TransmissionFit out;
  const auto peaks = find_peaks(trace, 0.2);
  if (peaks.empty()) throw FitError("fit_transmission: no transmission peak found");

  double g0, gamma0, fq0;
  if (peaks.size() >= 2) {
    const double fa = std::max(peaks[0].freq, peaks[1].freq);
    const double fb = std::min(peaks[0].freq, peaks[1].freq);
    fq0 = fa + fb - known.f_r;
    const double sep = fa - fb;
    const double det = known.f_r - fq0;
    g0 = to_angular(0.5 * std::sqrt(std::max(sep * sep - det * det, 0.25 * sep * sep)));
    const double w = to_angular(0.5 * (peak_fwhm(trace, peaks[0]) + peak_fwhm(trace, peaks[1])));
    gamma0 = std::max(2.0 * w - known.kappa, 0.1 * known.kappa);
  } else {
    out.resolved = false;
    out.warnings.push_back(
        "fit_transmission: single transmission peak; vacuum Rabi splitting not resolved, "
        "parameters are poorly constrained");
    fq0 = known.f_r;
    g0 = 0.1 * known.kappa;
    gamma0 = known.kappa;
  }

  auto resid = [&](std::span<const double> x, std::span<double> r) {
    const CavityQubitParams p{known.f_r, known.kappa, x[2], std::abs(x[1]), std::abs(x[0])};
    for (std::size_t i = 0; i < trace.size(); ++i)
      r[i] = std::abs(transmission(p, trace[i].freq)) - trace[i].amp;
  };

  lsq::Options opt;
  opt.scale = {known.kappa, known.kappa, to_hz(known.kappa)};
  lsq::Bounds bounds{{0.0, 1e-6 * known.kappa, trace.front().freq - (trace.back().freq - trace.front().freq)},
                     {1e3 * known.kappa, 1e3 * known.kappa, trace.back().freq + (trace.back().freq - trace.front().freq)}};

  // A few starts around the data-driven guess; keep the best.
  lsq::Result best;
  double init_norm = 0.0;
  bool have = false;
  for (const double gscale : {1.0, 0.8, 1.25}) {
    auto res = lsq::minimize(resid, trace.size(), {g0 * gscale, gamma0, fq0}, bounds, opt);
    if (!have) init_norm = res.initial_residual_norm;
    if (!have || res.residual_norm < best.residual_norm) best = std::move(res);
    have = true;
  }

  out.g = std::abs(best.params[0]);
  out.gamma = std::abs(best.params[1]);
  out.f_q = best.params[2];
  out.g_err = best.std_errors[0];
  out.gamma_err = best.std_errors[1];
  out.f_q_err = best.std_errors[2];
  out.residual_norm = best.residual_norm;
  out.initial_residual_norm = init_norm;
  if (!out.resolved) {
    // Under-resolved splitting: report at least the scale of the search space.
    out.g_err = std::max(out.g_err, out.g);
    out.gamma_err = std::max(out.gamma_err, out.gamma);
  }
  return out;
}

double purcell_rate(const CavityQubitParams& p) {
  const double delta = to_angular(p.f_r - p.f_q);
  if (delta == 0.0) throw DomainError("purcell_rate: zero detuning (formula invalid on resonance)");
  return p.kappa * p.g * p.g / (delta * delta);
}

}  // namespace qnl::spectro
