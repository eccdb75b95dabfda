#include "qnl/mcsim.hpp"

#include "qnl/error.hpp"
#include "qnl/fft.hpp"
#include "qnl/units.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

namespace qnl::mcsim {

void SyntheticNoise::validate() const {
  if (!(f_min >= 0.0 && f_min < f_max)) throw DomainError("SyntheticNoise: need 0 <= f_min < f_max");
  if (!(amplitude >= 0.0)) throw DomainError("SyntheticNoise: amplitude must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 3.0)) throw DomainError("SyntheticNoise: alpha must lie in [0, 3]");
}

namespace {

constexpr std::size_t kMaxRecord = std::size_t{1} << 24;

std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return std::mt19937_64(seq);
}

// Per-thread synthesis state: FFT plan, mode amplitudes and scratch buffers.
class Synthesizer {
 public:
  Synthesizer(const SyntheticNoise& spec, double dt, std::size_t n)
      : spec_(spec), fft_(n), coef_(fft_.bins()), samples_(n) {
    const double df = 1.0 / (static_cast<double>(n) * dt);
    const double f_nyq = 0.5 / dt;
    clipped_ = (spec.f_min > 0.0 && spec.f_min < df) || spec.f_max > f_nyq;
    k_lo_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(spec.f_min / df - 1e-9)));
    k_hi_ = std::min<std::size_t>(static_cast<std::size_t>(std::floor(spec.f_max / df + 1e-9)),
                                  n / 2 - 1);
    sigma_.assign(fft_.bins(), 0.0);
    for (std::size_t k = k_lo_; k <= k_hi_; ++k) {
      const double f = static_cast<double>(k) * df;
      sigma_[k] = std::sqrt(spec.amplitude * std::pow(f, -spec.alpha) * df);
    }
  }

  bool clipped() const { return clipped_; }

  const std::vector<double>& draw(std::uint64_t stream) {
    auto rng = stream_engine(spec_.seed, stream);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::fill(coef_.begin(), coef_.end(), std::complex<double>{});
    for (std::size_t k = k_lo_; k <= k_hi_; ++k) {
      const double a = normal(rng);
      const double b = normal(rng);
      // Hermitian half-spectrum: x_j = sum_k a_k cos(2 pi k j/n) + b_k sin(2 pi k j/n).
      coef_[k] = 0.5 * sigma_[k] * std::complex<double>(a, -b);
    }
    fft_.inverse(coef_, samples_);
    return samples_;
  }

 private:
  SyntheticNoise spec_;
  fft::RealFft fft_;
  std::vector<std::complex<double>> coef_;
  std::vector<double> samples_;
  std::vector<double> sigma_;
  std::size_t k_lo_ = 1;
  std::size_t k_hi_ = 0;
  bool clipped_ = false;
};

// Running integral of the linearly interpolated noise.
void cumulative(const std::vector<double>& x, double dt, std::vector<double>& out) {
  out.resize(x.size());
  out[0] = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) out[k] = out[k - 1] + 0.5 * dt * (x[k - 1] + x[k]);
}

double integral_to(const std::vector<double>& x, const std::vector<double>& cum, double dt,
                   double t) {
  const auto k = std::min(static_cast<std::size_t>(t / dt), x.size() - 2);
  const double d = t - static_cast<double>(k) * dt;
  return cum[k] + x[k] * d + (x[k + 1] - x[k]) * d * d / (2.0 * dt);
}

// phi(tau) = s * int_0^tau sign(t) lambda(t) dt; the toggling sign is +1 before
// the first pulse, flips across each pulse and is zero while a pulse is on.
double accumulated_phase(const std::vector<double>& x, const std::vector<double>& cum, double dt,
                         int n_pulses, double tau_pi, double tau, double sensitivity) {
  double phase = 0.0;
  double start = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= n_pulses; ++j) {
    const double centre = tau * (j - 0.5) / n_pulses;
    const double stop = centre - 0.5 * tau_pi;
    phase += sign * (integral_to(x, cum, dt, stop) - integral_to(x, cum, dt, start));
    start = centre + 0.5 * tau_pi;
    sign = -sign;
  }
  phase += sign * (integral_to(x, cum, dt, tau) - integral_to(x, cum, dt, start));
  return sensitivity * phase;
}

struct Plan {
  std::vector<double> taus;
  std::size_t n = 0;
};

Plan prepare(const SyntheticNoise& spec, const ddfilter::PulseSequence& seq,
             std::span<const double> tau_grid, std::size_t n_traj, double dt) {
  spec.validate();
  if (n_traj == 0) throw DomainError("simulate_sequence: n_traj must be >= 1");
  if (!(dt > 0.0)) throw DomainError("simulate_sequence: dt must be > 0");
  Plan p;
  p.taus.assign(tau_grid.begin(), tau_grid.end());
  if (p.taus.empty()) p.taus.push_back(seq.tau);
  for (std::size_t i = 0; i < p.taus.size(); ++i) {
    ddfilter::PulseSequence s{seq.n_pulses, p.taus[i], seq.tau_pi};
    s.validate();
    if (i > 0 && !(p.taus[i] > p.taus[i - 1]))
      throw DomainError("simulate_sequence: tau grid must be strictly increasing");
  }
  const double tau_min = p.taus.front();
  if (dt > tau_min / (10.0 * std::max(seq.n_pulses, 1)))
    throw DomainError("simulate_sequence: dt too coarse (dt > tau/(10 N))");
  p.n = record_length(spec, p.taus.back(), dt);
  return p;
}

SimulationResult assemble(const ddfilter::PulseSequence& seq, const Plan& plan,
                          const std::vector<double>& phases, std::size_t n_traj, bool clipped) {
  const std::size_t m = plan.taus.size();
  SimulationResult out;
  out.record_length = plan.n;
  out.band_clipped = clipped;
  out.coherence.assign(m, 0.0);
  out.mean_phase_sq.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double c = 0.0, s = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < n_traj; ++t) {
      const double ph = phases[t * m + i];
      c += std::cos(ph);
      s += std::sin(ph);
      sq += ph * ph;
    }
    const double inv = 1.0 / static_cast<double>(n_traj);
    out.coherence[i] = std::hypot(c, s) * inv;
    out.mean_phase_sq[i] = sq * inv;
  }
  out.trace.times = plan.taus;
  out.trace.populations.resize(m);
  for (std::size_t i = 0; i < m; ++i) out.trace.populations[i] = 0.5 * (1.0 + out.coherence[i]);
  out.trace.n_pulses = seq.n_pulses;
  out.trace.kind = seq.n_pulses == 0   ? decayfit::TraceKind::ramsey
                   : seq.n_pulses == 1 ? decayfit::TraceKind::echo
                                       : decayfit::TraceKind::cpmg;
  return out;
}

}  // namespace

std::size_t record_length(const SyntheticNoise& spec, double tau_max, double dt) {
  const double need_span = std::ceil(tau_max / dt) + 2.0;
  const double need_band = spec.f_min > 0.0 ? std::ceil(1.0 / (spec.f_min * dt)) : 0.0;
  const double need = std::max({need_span, need_band, 4.0});
  std::size_t n = 4;
  while (static_cast<double>(n) < need && n < kMaxRecord) n <<= 1;
  if (static_cast<double>(n) < need_span)
    throw DomainError("simulate_sequence: record would exceed the maximum length");
  return n;
}

Trajectory synthesize_noise(const SyntheticNoise& spec, double dt, std::size_t n,
                            std::uint64_t stream) {
  spec.validate();
  if (n < 4) throw DomainError("synthesize_noise: need n >= 4");
  if (!(dt > 0.0)) throw DomainError("synthesize_noise: dt must be > 0");
  Synthesizer synth(spec, dt, n);
  Trajectory t;
  t.dt = dt;
  t.samples = synth.draw(stream);
  t.band_clipped = synth.clipped();
  return t;
}

SimulationResult simulate_sequence(const SyntheticNoise& spec, const ddfilter::PulseSequence& seq,
                                   std::span<const double> tau_grid, double sensitivity,
                                   std::size_t n_traj, double dt) {
  const Plan plan = prepare(spec, seq, tau_grid, n_traj, dt);
  const std::size_t m = plan.taus.size();
  std::vector<double> phases(n_traj * m);
  bool clipped = false;

#pragma omp parallel
  {
    Synthesizer synth(spec, dt, plan.n);
    std::vector<double> cum;
#pragma omp single
    clipped = synth.clipped();
#pragma omp for schedule(static)
    for (long long t = 0; t < static_cast<long long>(n_traj); ++t) {
      const auto& x = synth.draw(static_cast<std::uint64_t>(t));
      cumulative(x, dt, cum);
      for (std::size_t i = 0; i < m; ++i)
        phases[static_cast<std::size_t>(t) * m + i] = accumulated_phase(
            x, cum, dt, seq.n_pulses, seq.tau_pi, plan.taus[i], sensitivity);
    }
  }
  return assemble(seq, plan, phases, n_traj, clipped);
}

SimulationResult simulate_sequence_serial(const SyntheticNoise& spec,
                                          const ddfilter::PulseSequence& seq,
                                          std::span<const double> tau_grid, double sensitivity,
                                          std::size_t n_traj, double dt) {
  const Plan plan = prepare(spec, seq, tau_grid, n_traj, dt);
  const std::size_t m = plan.taus.size();
  std::vector<double> phases(n_traj * m);
  Synthesizer synth(spec, dt, plan.n);
  std::vector<double> cum;
  for (std::size_t t = 0; t < n_traj; ++t) {
    const auto& x = synth.draw(t);
    cumulative(x, dt, cum);
    for (std::size_t i = 0; i < m; ++i)
      phases[t * m + i] =
          accumulated_phase(x, cum, dt, seq.n_pulses, seq.tau_pi, plan.taus[i], sensitivity);
  }
  return assemble(seq, plan, phases, n_traj, synth.clipped());
}

double angular_psd(const SyntheticNoise& psd, double sensitivity, double f) {
  return sensitivity * sensitivity * psd.amplitude * std::pow(f, -psd.alpha) /
         (4.0 * std::numbers::pi);
}

double band_variance(const SyntheticNoise& psd) {
  psd.validate();
  if (psd.alpha == 1.0) {
    if (psd.f_min == 0.0) return std::numeric_limits<double>::infinity();
    return psd.amplitude * std::log(psd.f_max / psd.f_min);
  }
  if (psd.alpha > 1.0 && psd.f_min == 0.0) return std::numeric_limits<double>::infinity();
  const double e = 1.0 - psd.alpha;
  return psd.amplitude * (std::pow(psd.f_max, e) - std::pow(psd.f_min, e)) / e;
}

namespace {

// 15-point Gauss-Kronrod with embedded 7-point Gauss rule.
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
double gauss_kronrod(const F& f, double a, double b, double& err) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double rk = fc * kWgk[7];
  double rg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double x = h * kXgk[j];
    const double s = f(c - x) + f(c + x);
    rk += kWgk[j] * s;
    if (j % 2 == 1) rg += kWg[j / 2] * s;
  }
  err = std::abs((rk - rg) * h);
  return rk * h;
}

template <class F>
double adaptive(const F& f, double a, double b, double tol, int depth) {
  double err = 0.0;
  const double v = gauss_kronrod(f, a, b, err);
  if (err <= tol || depth >= 40) return v;
  const double m = 0.5 * (a + b);
  return adaptive(f, a, m, 0.5 * tol, depth + 1) + adaptive(f, m, b, 0.5 * tol, depth + 1);
}

}  // namespace

double dephasing_integral(const SyntheticNoise& psd, const ddfilter::PulseSequence& seq,
                          double sensitivity, const QuadratureOptions& options) {
  psd.validate();
  seq.validate();
  if (psd.alpha >= 3.0) throw DomainError("dephasing_integral: alpha must be < 3");
  if (psd.alpha >= 1.0 && psd.f_min == 0.0)
    throw DomainError("dephasing_integral: alpha >= 1 diverges without an infrared cutoff f_min > 0");
  if (psd.amplitude == 0.0 || sensitivity == 0.0) return 0.0;

  const double tau = seq.tau;
  const double w_max = to_angular(psd.f_max);
  const double coeff = psd.amplitude * std::pow(kTwoPi, psd.alpha) / (4.0 * std::numbers::pi);
  auto integrand = [&](double w) {
    return coeff * std::pow(w, -psd.alpha) * ddfilter::filter_value(seq, w);
  };

  double total = 0.0;
  double w_lo = to_angular(psd.f_min);
  if (w_lo == 0.0) {
    // Below w0 the filter is flat at g_N(0); integrate the power law exactly.
    const double w0 = std::min(1e-6 / tau, w_max);
    total += coeff * ddfilter::filter_value(seq, 0.0) * std::pow(w0, 1.0 - psd.alpha) /
             (1.0 - psd.alpha);
    w_lo = w0;
  }

  // Panels: logarithmic across decades, capped in width by the filter's
  // oscillation period 2 pi / tau.
  const double ratio = std::pow(10.0, 1.0 / (20.0 * options.resolution));
  const double max_width = std::numbers::pi / (2.0 * tau * options.resolution);
  std::vector<double> edges{w_lo};
  while (edges.back() < w_max) {
    const double w = edges.back();
    edges.push_back(std::min({w * ratio, w + max_width, w_max}));
  }

  // Rough magnitude for the absolute tolerance.
  double rough = 0.0;
  for (std::size_t i = 1; i < edges.size(); ++i) {
    const double m = 0.5 * (edges[i - 1] + edges[i]);
    rough += integrand(m) * (edges[i] - edges[i - 1]);
  }
  const double tol = options.rel_tol * std::max(std::abs(rough), 1e-300) /
                     static_cast<double>(edges.size());
  for (std::size_t i = 1; i < edges.size(); ++i)
    total += adaptive(integrand, edges[i - 1], edges[i], tol, 0);

  return tau * tau * sensitivity * sensitivity * total;
}

}  // namespace qnl::mcsim
