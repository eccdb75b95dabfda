#include "qnl/decayfit.hpp"

#include "qnl/lsq.hpp"
#include "qnl/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

namespace qnl::decayfit {

std::string to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::relaxation: return "relaxation";
    case TraceKind::ramsey: return "ramsey";
    case TraceKind::echo: return "echo";
    case TraceKind::cpmg: return "cpmg";
  }
  return "unknown";
}

TraceKind trace_kind_from_string(const std::string& s) {
  if (s == "relaxation" || s == "t1") return TraceKind::relaxation;
  if (s == "ramsey") return TraceKind::ramsey;
  if (s == "echo") return TraceKind::echo;
  if (s == "cpmg") return TraceKind::cpmg;
  throw InputError("unknown trace kind '" + s + "'");
}

void DecayTrace::validate() const {
  if (times.size() != populations.size())
    throw InputError("DecayTrace: times and populations differ in length");
  if (times.empty()) throw InputError("DecayTrace: empty trace");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(populations[i]))
      throw InputError("DecayTrace: non-finite value at row " + std::to_string(i));
    if (i > 0 && !(times[i] > times[i - 1]))
      throw InputError("DecayTrace: times not strictly increasing at row " + std::to_string(i));
  }
  if (kind == TraceKind::cpmg && n_pulses < 1)
    throw InputError("DecayTrace: cpmg trace needs n_pulses >= 1");
}

std::vector<std::size_t> DecayTrace::out_of_range_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < populations.size(); ++i)
    if (populations[i] < -0.1 || populations[i] > 1.1) rows.push_back(i);
  return rows;
}

namespace {

double span_of(const DecayTrace& t) { return t.times.back() - t.times.front(); }

// Linear least squares for (p0, a) given a fixed envelope shape e(t).
struct LinearFit {
  double p0 = 0.0;
  double a = 0.0;
  double ssr = std::numeric_limits<double>::infinity();
};

LinearFit fit_offset_amplitude(const DecayTrace& t, const std::vector<double>& envelope) {
  const auto n = static_cast<Eigen::Index>(t.times.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = envelope[static_cast<std::size_t>(i)];
    b(i) = t.populations[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd x = a.completeOrthogonalDecomposition().solve(b);
  return {x(0), x(1), (a * x - b).squaredNorm()};
}

std::vector<double> geometric_grid(double lo, double hi, int count) {
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return g;
}

double min_spacing(const DecayTrace& t) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < t.times.size(); ++i) m = std::min(m, t.times[i] - t.times[i - 1]);
  return m;
}

void require_kind(const DecayTrace& t, std::initializer_list<TraceKind> kinds, const char* who) {
  if (std::find(kinds.begin(), kinds.end(), t.kind) == kinds.end())
    throw FitError(std::string(who) + ": wrong trace kind '" + to_string(t.kind) + "'");
}

CoherenceFit exponential_fit(const DecayTrace& trace) {
  const double span = span_of(trace);
  const double tmax = trace.times.back();

  // Variable-projection start: scan T1, solve (p0, a) linearly.
  double best_t = span;
  LinearFit best;
  std::vector<double> env(trace.times.size());
  for (const double tc : geometric_grid(span / 50.0, 20.0 * span, 40)) {
    for (std::size_t i = 0; i < env.size(); ++i) env[i] = std::exp(-trace.times[i] / tc);
    const auto lf = fit_offset_amplitude(trace, env);
    if (lf.ssr < best.ssr) {
      best = lf;
      best_t = tc;
    }
  }

  auto resid = [&](std::span<const double> x, std::span<double> r) {
    for (std::size_t i = 0; i < trace.times.size(); ++i)
      r[i] = x[0] + x[1] * std::exp(-trace.times[i] / x[2]) - trace.populations[i];
  };
  lsq::Options opt;
  opt.scale = {1.0, 1.0, span};
  const lsq::Bounds bounds{{-1e3, -1e3, 1e-3 * min_spacing(trace)}, {1e3, 1e3, 1e6 * tmax}};
  const auto res = lsq::minimize(resid, trace.times.size(), {best.p0, best.a, best_t}, bounds, opt);

  CoherenceFit f;
  f.offset = res.params[0];
  f.amplitude = res.params[1];
  f.t2 = res.params[2];
  f.offset_err = res.std_errors[0];
  f.amplitude_err = res.std_errors[1];
  f.t2_err = res.std_errors[2];
  f.residual_norm = res.residual_norm;
  f.initial_residual_norm = res.initial_residual_norm;
  return f;
}

// Dominant frequency of the mean-subtracted signal on the DFT grid
// k / (n dt_mean), refined by zero padding.
struct DominantTone {
  double freq = 0.0;
  double power = 0.0;
  double bin = 0.0;  // spacing of the unpadded grid, Hz
  double mean_power = 0.0;
};

DominantTone dominant_tone(const DecayTrace& t, int pad) {
  const std::size_t n = t.times.size();
  const double mean = std::accumulate(t.populations.begin(), t.populations.end(), 0.0) / n;
  const double dt = (t.times.back() - t.times.front()) / static_cast<double>(n - 1);
  const double bin = 1.0 / (static_cast<double>(n) * dt);
  DominantTone out;
  out.bin = bin;
  const int kmax = static_cast<int>(n / 2) * pad;
  double total = 0.0;
  for (int k = 1; k <= kmax; ++k) {
    const double f = bin * k / pad;
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += (t.populations[i] - mean) * std::polar(1.0, -kTwoPi * f * t.times[i]);
    const double p = std::norm(acc);
    total += p;
    if (p > out.power) {
      out.power = p;
      out.freq = f;
    }
  }
  out.mean_power = total / kmax;
  return out;
}

}  // namespace

CoherenceFit fit_relaxation(const DecayTrace& trace) {
  trace.validate();
  require_kind(trace, {TraceKind::relaxation}, "fit_relaxation");
  if (trace.times.size() < 5) throw FitError("fit_relaxation: need at least 5 points");

  CoherenceFit f = exponential_fit(trace);
  f.t1 = f.t2;
  f.t1_err = f.t2_err;
  f.stretch = 1.0;
  if (f.t2 > 100.0 * trace.times.back()) {
    f.low_confidence = true;
    f.warnings.push_back("fit_relaxation: fitted T1 exceeds 100x the longest delay");
  }
  return f;
}

CoherenceFit fit_ramsey(const DecayTrace& trace) {
  trace.validate();
  require_kind(trace, {TraceKind::ramsey}, "fit_ramsey");
  if (trace.times.size() < 10) throw FitError("fit_ramsey: need at least 10 points");

  const double span = span_of(trace);
  const auto tone = dominant_tone(trace, 8);
  const bool oscillates =
      tone.power > 0.0 && tone.freq * span >= 1.5 && tone.power >= 4.0 * tone.mean_power;

  if (!oscillates) {
    CoherenceFit f = exponential_fit(trace);
    f.stretch = 1.0;
    f.detuning_unconstrained = true;
    f.warnings.push_back("fit_ramsey: no oscillation detected; fitted exponential envelope only");
    return f;
  }

  // Variable projection over T2* with the detuning fixed at the FFT peak.
  const std::size_t n = trace.times.size();
  double best_ssr = std::numeric_limits<double>::infinity();
  std::vector<double> x0;
  for (const double tc : geometric_grid(span / 20.0, 20.0 * span, 30)) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double e = std::exp(-trace.times[i] / tc);
      const double th = kTwoPi * tone.freq * trace.times[i];
      a(ii, 0) = 1.0;
      a(ii, 1) = e * std::cos(th);
      a(ii, 2) = e * std::sin(th);
      b(ii) = trace.populations[i];
    }
    const Eigen::VectorXd c = a.completeOrthogonalDecomposition().solve(b);
    const double ssr = (a * c - b).squaredNorm();
    if (ssr < best_ssr) {
      best_ssr = ssr;
      x0 = {c(0), std::hypot(c(1), c(2)), tc, tone.freq, std::atan2(-c(2), c(1))};
    }
  }

  auto resid = [&](std::span<const double> x, std::span<double> r) {
    for (std::size_t i = 0; i < n; ++i) {
      const double t = trace.times[i];
      r[i] = x[0] + x[1] * std::exp(-t / x[2]) * std::cos(kTwoPi * x[3] * t + x[4]) -
             trace.populations[i];
    }
  };
  lsq::Options opt;
  opt.scale = {1.0, 1.0, span, tone.bin, 1.0};
  const lsq::Bounds bounds{{-1e3, 0.0, 1e-3 * min_spacing(trace), 0.0, -1e3},
                           {1e3, 1e3, 1e6 * trace.times.back(), 1.0 / min_spacing(trace), 1e3}};
  const auto res = lsq::minimize(resid, n, x0, bounds, opt);

  CoherenceFit f;
  f.offset = res.params[0];
  f.amplitude = res.params[1];
  f.t2 = res.params[2];
  f.detuning = res.params[3];
  f.phase = std::remainder(res.params[4], kTwoPi);
  f.offset_err = res.std_errors[0];
  f.amplitude_err = res.std_errors[1];
  f.t2_err = res.std_errors[2];
  f.detuning_err = res.std_errors[3];
  f.stretch = 1.0;
  f.residual_norm = res.residual_norm;
  f.initial_residual_norm = res.initial_residual_norm;
  return f;
}

double cpmg_decay_model(const CoherenceFit& fit, double t1, double tau) {
  const double relax = std::isinf(t1) ? 1.0 : std::exp(-tau / (2.0 * t1));
  const double tphi = fit.t_phi.value_or(std::numeric_limits<double>::infinity());
  const double dephase = std::isinf(tphi) ? 1.0 : std::exp(-std::pow(tau / tphi, fit.stretch));
  return fit.offset + fit.amplitude * relax * dephase;
}

double t2_cpmg(double t1, double t_phi, double stretch) {
  if (!(t1 > 0.0) || !(t_phi > 0.0) || !(stretch > 0.0))
    throw DomainError("t2_cpmg: T1, T_phi and stretch must be > 0");
  if (std::isinf(t_phi)) {
    if (std::isinf(t1)) throw DomainError("t2_cpmg: no decay (T1 and T_phi infinite)");
    return 2.0 * t1;
  }
  auto h = [&](double tau) {
    const double relax = std::isinf(t1) ? 0.0 : tau / (2.0 * t1);
    return relax + std::pow(tau / t_phi, stretch) - 1.0;
  };
  double lo = std::isinf(t1) ? t_phi / 10.0 : std::min(t1, t_phi) / 10.0;
  double hi = std::isinf(t1) ? 10.0 * t_phi : 10.0 * std::max(2.0 * t1, t_phi);
  if (h(lo) > 0.0 || h(hi) < 0.0) throw DomainError("t2_cpmg: root not bracketed");
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CoherenceFit fit_cpmg(const DecayTrace& trace, double t1) {
  trace.validate();
  require_kind(trace, {TraceKind::cpmg, TraceKind::echo}, "fit_cpmg");
  if (!(t1 > 0.0)) throw FitError("fit_cpmg: T1 must be > 0");
  if (trace.times.size() < 5) throw FitError("fit_cpmg: need at least 5 points");

  const double span = span_of(trace);
  const double tmax = trace.times.back();
  const std::size_t n = trace.times.size();
  auto relax = [&](double tau) { return std::isinf(t1) ? 1.0 : std::exp(-tau / (2.0 * t1)); };

  // Start: scan T_phi at the Gaussian exponent, solve (p0, a) linearly.
  constexpr double kStretchStart = 2.0;
  std::vector<double> env(n);
  LinearFit best;
  double best_tphi = span;
  for (const double tc : geometric_grid(tmax / 30.0, 10.0 * tmax, 60)) {
    for (std::size_t i = 0; i < n; ++i)
      env[i] = relax(trace.times[i]) * std::exp(-std::pow(trace.times[i] / tc, kStretchStart));
    const auto lf = fit_offset_amplitude(trace, env);
    if (lf.ssr < best.ssr) {
      best = lf;
      best_tphi = tc;
    }
  }

  auto resid = [&](std::span<const double> x, std::span<double> r) {
    for (std::size_t i = 0; i < n; ++i) {
      const double t = trace.times[i];
      r[i] = x[0] + x[1] * relax(t) * std::exp(-std::pow(t / x[2], x[3])) - trace.populations[i];
    }
  };
  lsq::Options opt;
  opt.scale = {1.0, 1.0, best_tphi, 1.0};
  const lsq::Bounds bounds{{-1e3, -1e3, 1e-3 * min_spacing(trace), kStretchMin},
                           {1e3, 1e3, 1e4 * tmax, kStretchMax}};
  const auto res =
      lsq::minimize(resid, n, {best.p0, best.a, best_tphi, kStretchStart}, bounds, opt);

  CoherenceFit f;
  f.t1 = t1;
  f.offset = res.params[0];
  f.amplitude = res.params[1];
  f.t_phi = res.params[2];
  f.stretch = res.params[3];
  f.offset_err = res.std_errors[0];
  f.amplitude_err = res.std_errors[1];
  f.t_phi_err = res.std_errors[2];
  f.stretch_err = res.std_errors[3];
  f.residual_norm = res.residual_norm;
  f.initial_residual_norm = res.initial_residual_norm;
  f.t2 = t2_cpmg(t1, *f.t_phi, f.stretch);
  if (f.stretch <= kStretchMin * (1.0 + 1e-9) || f.stretch >= kStretchMax * (1.0 - 1e-9)) {
    f.stretch_at_bound = true;
    f.warnings.push_back("fit_cpmg: stretch exponent pinned at a bound; exponent unreliable");
  }
  return f;
}

ScalingError::ScalingError(double beta)
    : FitError("fit_scaling: fitted beta = " + std::to_string(beta) +
               " outside (0, 1); alpha undefined"),
      beta_(beta) {}

double alpha_from_beta(double beta) {
  if (!(beta < 1.0)) throw ScalingError(beta);
  return beta / (1.0 - beta);
}

double beta_from_alpha(double alpha) { return alpha / (1.0 + alpha); }

ScalingFit fit_scaling(const std::vector<ScalingPoint>& points) {
  if (points.size() < 3) throw FitError("fit_scaling: need at least 3 points");
  const double m = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& p : points) {
    if (p.n_pulses < 1) throw FitError("fit_scaling: N must be >= 1");
    if (!(p.t_phi > 0.0)) throw FitError("fit_scaling: T_phi must be > 0");
    sx += std::log(static_cast<double>(p.n_pulses));
    sy += std::log(p.t_phi);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(static_cast<double>(p.n_pulses)) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(p.t_phi) - my);
  }
  if (!(sxx > 0.0)) throw FitError("fit_scaling: all points share one N");
  const double beta = sxy / sxx;
  const double intercept = my - beta * mx;
  double ssr = 0.0;
  for (const auto& p : points) {
    const double e = std::log(p.t_phi) - (intercept + beta * std::log(static_cast<double>(p.n_pulses)));
    ssr += e * e;
  }
  const double beta_err = std::sqrt(ssr / (m - 2.0) / sxx);
  if (!(beta > 0.0 && beta < 1.0)) throw ScalingError(beta);

  ScalingFit out;
  out.beta = beta;
  out.alpha = alpha_from_beta(beta);
  out.beta_err = beta_err;
  out.alpha_err = beta_err / ((1.0 - beta) * (1.0 - beta));
  out.prefactor = std::exp(intercept);
  return out;
}

}  // namespace qnl::decayfit
