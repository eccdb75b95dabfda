#include "qnl/ddfilter.hpp"

#include "qnl/error.hpp"
#include "qnl/units.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace qnl::ddfilter {

void PulseSequence::validate() const {
  if (n_pulses < 0) throw DomainError("PulseSequence: n_pulses must be >= 0");
  if (!(tau > 0.0)) throw DomainError("PulseSequence: tau must be > 0");
  if (!(tau_pi >= 0.0)) throw DomainError("PulseSequence: tau_pi must be >= 0");
  if (!(n_pulses * tau_pi < tau)) throw DomainError("PulseSequence: pulses do not fit in tau");
}

namespace {

constexpr double kSeriesThreshold = 1e-4;  // in units of omega*tau

double sign_pow(int k) { return (k % 2 == 0) ? 1.0 : -1.0; }

// y_N''(0) w.r.t. x = omega*tau; real because y_N(0) = y_N'(0) = 0 for N >= 1.
double second_derivative_at_zero(const PulseSequence& seq) {
  const int n = seq.n_pulses;
  const double r = seq.tau_pi / seq.tau;
  double acc = -sign_pow(n + 1);
  for (int j = 1; j <= n; ++j) {
    const double a = (j - 0.5) / n;
    acc += 2.0 * sign_pow(j) * (-(a * a) - r * r / 4.0);
  }
  return acc;
}

}  // namespace

double filter_value(const PulseSequence& seq, double omega) {
  if (omega < 0.0) throw DomainError("filter_value: omega must be >= 0");
  const double x = omega * seq.tau;
  const int n = seq.n_pulses;

  if (n == 0) {
    if (x < kSeriesThreshold) return 1.0 - x * x / 12.0;
    const double s = std::sin(0.5 * x);
    return 4.0 * s * s / (x * x);
  }
  if (x < kSeriesThreshold) {
    const double d2 = second_derivative_at_zero(seq);
    return 0.25 * d2 * d2 * x * x;
  }

  // Phasors advance by a fixed rotation between pulses.
  const double pulse_factor = 2.0 * std::cos(0.5 * omega * seq.tau_pi);
  const std::complex<double> step = std::polar(1.0, x / n);
  std::complex<double> phasor = std::polar(1.0, 0.5 * x / n);
  std::complex<double> sum = 0.0;
  double sgn = -1.0;
  for (int j = 1; j <= n; ++j) {
    sum += sgn * phasor;
    phasor *= step;
    sgn = -sgn;
  }
  const std::complex<double> y = 1.0 + sign_pow(n + 1) * std::polar(1.0, x) + pulse_factor * sum;
  return std::norm(y) / (x * x);
}

FilterPeak first_harmonic_peak(const PulseSequence& seq) {
  seq.validate();
  if (seq.n_pulses < 1)
    throw DomainError("first_harmonic_peak: needs N >= 1 (Ramsey has no harmonic peak)");

  const double w_nominal = kTwoPi * seq.n_pulses / (2.0 * seq.tau);
  const double lo = 0.5 * w_nominal;
  const double hi = 1.5 * w_nominal;
  auto g = [&](double w) { return filter_value(seq, w); };

  // Coarse scan picks the harmonic lobe (side lobes sit inside the bracket
  // for large N), then golden-section refines within neighbouring samples.
  const int samples = 64 * std::max(seq.n_pulses, 4);
  const double h = (hi - lo) / samples;
  int best = 0;
  double best_val = -1.0;
  for (int i = 0; i <= samples; ++i) {
    const double v = g(lo + i * h);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = lo + std::max(best - 1, 0) * h;
  double b = lo + std::min(best + 1, samples) * h;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double gc = g(c), gd = g(d);
  while ((b - a) > 1e-10 * 0.5 * (a + b)) {
    if (gc > gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - inv_phi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + inv_phi * (b - a);
      gd = g(d);
    }
  }
  const double w_peak = 0.5 * (a + b);
  const double g_peak = g(w_peak);
  const double half = 0.5 * g_peak;

  // Walk each flank until g drops below half, then bisect.
  const double walk = w_peak / (64.0 * seq.n_pulses);
  auto flank = [&](double direction) {
    double inner = w_peak;
    double outer = w_peak;
    for (int i = 0; i < 100000; ++i) {
      outer = w_peak + direction * walk * (i + 1);
      if (outer <= 0.0) {
        outer = 0.0;
        break;
      }
      if (g(outer) < half) break;
      inner = outer;
    }
    for (int i = 0; i < 200 && std::abs(outer - inner) > 1e-12 * w_peak; ++i) {
      const double mid = 0.5 * (inner + outer);
      (g(mid) >= half ? inner : outer) = mid;
    }
    return 0.5 * (inner + outer);
  };
  const double w_lo = flank(-1.0);
  const double w_hi = flank(+1.0);

  return {to_hz(w_peak), w_hi - w_lo, g_peak};
}

std::vector<double> filter_scan(const PulseSequence& seq, std::span<const double> omegas) {
  std::vector<double> out(omegas.size());
  const auto n = static_cast<long long>(omegas.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = filter_value(seq, omegas[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<double> filter_scan_serial(const PulseSequence& seq, std::span<const double> omegas) {
  std::vector<double> out;
  out.reserve(omegas.size());
  for (const double w : omegas) out.push_back(filter_value(seq, w));
  return out;
}

}  // namespace qnl::ddfilter
