// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "qnl/ddfilter.hpp"
#include "qnl/decayfit.hpp"
#include "qnl/mcsim.hpp"
#include "qnl/noisespec.hpp"
#include "qnl/resonator.hpp"
#include "qnl/spectro.hpp"
#include "qnl/thermal.hpp"
#include "qnl/units.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace qnl;
using namespace qnl::literals;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Each criterion collects named sub-checks; it passes only if all of them do.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    all_ &= ok;
    if (!ok) failed_.push_back(what);
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  bool ok() const { return all_; }
  std::string summary() const {
    std::string s = notes_;
    for (const auto& f : failed_) s += (s.empty() ? "failed: " : "; failed: ") + f;
    return s;
  }

 private:
  bool all_ = true;
  std::vector<std::string> failed_;
  std::string notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool within_rel(double x, double ref, double tol) { return std::abs(x / ref - 1.0) <= tol; }

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return v;
}

void resonator_pins(Checks& c) {
  const double lk = resonator::kinetic_inductance({3.8, 64.42});
  c.note("L_k = " + fmt("%.4g", lk * 1e12) + " pH/sq");
  c.expect(within_rel(lk, 23.4e-12, 0.005), "L_k");
  const auto m = resonator::lumped_model(23.4e-12, 0.3e-6, 1061e-6, 5.6681e9);
  c.note("Z = " + fmt("%.4g", m.z_diff) + " Ohm, L = " + fmt("%.4g", m.l_diff) + " H, C = " + fmt("%.4g", m.c_diff) + " F");
  c.expect(within_rel(m.z_diff, 598.5, 0.01), "Z_diff");
  c.expect(within_rel(m.l_diff, 1.68e-8, 0.01), "L_diff");
  c.expect(within_rel(m.c_diff, 4.69e-14, 0.01), "C_diff");
}

void purcell(Checks& c) {
  const spectro::CavityQubitParams p{5.668_GHz, to_angular(0.38_MHz), 5.065_GHz, 0.0, to_angular(6.43_MHz)};
  const double inv = 1.0 / spectro::purcell_rate(p);
  c.note("1/Gamma = " + fmt("%.4g", inv * 1e3) + " ms at Delta/2pi = " + fmt("%.4g", (p.f_r - p.f_q) / 1e6) + " MHz");
  c.expect(inv >= 3.5e-3 && inv <= 4.3e-3, "1/Gamma in [3.5, 4.3] ms");
}

void scaling_inversion(Checks& c) {
  const double alpha = decayfit::alpha_from_beta(0.61);
  c.note("alpha(0.61) = " + fmt("%.4f", alpha));
  c.expect(std::abs(alpha - 1.56) <= 0.01, "alpha_from_beta");
  c.expect(std::abs(decayfit::beta_from_alpha(1.56) - 0.61) <= 0.01 * 0.61 / 1.56, "beta_from_alpha");
  std::vector<decayfit::ScalingPoint> pts;
  for (int n : {1, 2, 4, 8, 16}) pts.push_back({n, 3e-6 * std::pow(n, 0.61)});
  const auto fit = decayfit::fit_scaling(pts);
  c.note("fitted alpha = " + fmt("%.4f", fit.alpha));
  c.expect(std::abs(fit.alpha - 1.56) <= 0.01, "fit_scaling");
}

void thermal_pins(Checks& c) {
  const thermal::ThermalModel m{5.065_GHz, 5.668_GHz, to_angular(0.38_MHz), thermal::chi_from_reported(-0.12_MHz), 11.6_us};
  const double ratio = thermal::t1_vs_temperature(m, 0.2) / m.t1_zero;
  c.note("T1(200 mK)/T1(0) = " + fmt("%.4f", ratio));
  c.expect(ratio >= 0.50 && ratio <= 0.58, "tanh ratio");
  c.expect(thermal::resonator_dephasing(m, 0.0) == 0.0, "zero dephasing at n_th = 0");
  double worst = 0.0;
  for (double t : linspace(0.02, 1.0, 50)) {
    const double back = thermal::electron_temperature(thermal::thermal_population(m.f_q, t), m.f_q);
    worst = std::max(worst, std::abs(back / t - 1.0));
  }
  c.note("inverse pair max rel err = " + fmt("%.2g", worst));
  c.expect(worst <= 1e-12, "inverse pair");
}

void coupling(Checks& c) {
  const double r = resonator::coupling_ratio(598.5, 5.6681e9, 57.3, 6.42e9);
  c.note("ratio = " + fmt("%.4f", r));
  c.expect(within_rel(r, 2.85, 0.02), "coupling ratio");
}

decayfit::DecayTrace coherence_trace(const std::vector<double>& taus, const std::vector<double>& coh, int n) {
  decayfit::DecayTrace t;
  t.kind = n == 1 ? decayfit::TraceKind::echo : decayfit::TraceKind::cpmg;
  t.n_pulses = n;
  t.times = taus;
  for (double x : coh) t.populations.push_back(0.5 * (1.0 + x));
  return t;
}

void oracle_round_trip(Checks& c) {
  const double alpha = 1.5;
  const double s = 1.0;
  // Amplitude set so the N=2 coherence reaches 1/e at 5 us.
  mcsim::SyntheticNoise noise{1.0, alpha, 1e3, 10e6, 2024};
  noise.amplitude = 1.0 / mcsim::dephasing_integral(noise, {2, 5e-6, 0.0}, s);
  const double beta = alpha / (1.0 + alpha);

  std::vector<noisespec::PSDPoint> pts;
  double worst_ratio = 1.0;
  std::ostringstream per_point;
  for (int n : {2, 4, 8, 16}) {
    const double tphi_guess = 5e-6 * std::pow(n / 2.0, beta);
    const auto taus = linspace(0.2 * tphi_guess, 2.5 * tphi_guess, 25);
    const double dt = taus.front() / (10.0 * n);
    const auto sim = mcsim::simulate_sequence(noise, {n, taus.back(), 0.0}, taus, s, 10000, dt);
    const auto fit = decayfit::fit_cpmg(coherence_trace(taus, sim.coherence, n), kInf);
    const auto p = noisespec::reconstruct_psd_point(*fit.t_phi, {n, 0.0, 0.0});
    const double truth = mcsim::angular_psd(noise, s, p.freq);
    const double ratio = p.value / truth;
    worst_ratio = std::max(worst_ratio, std::max(ratio, 1.0 / ratio));
    per_point << " N=" << n << ":" << fmt("%.3f", ratio);
    pts.push_back(p);
  }
  const auto law = noisespec::powerlaw_fit(pts);
  c.note("exponent = " + fmt("%.3f", law.exponent) + ", S_rec/S_true" + per_point.str());
  c.expect(std::abs(law.exponent - alpha) <= 0.25, "exponent within 0.25");
  c.expect(worst_ratio <= 2.0, "per-point amplitude within factor 2");
}

void filter_vs_monte_carlo(Checks& c) {
  double worst = 0.0;
  std::uint64_t seed = 300;
  const double tau = 10e-6;
  for (double alpha : {1.0, 1.5}) {
    for (int n : {1, 4, 8}) {
      mcsim::SyntheticNoise noise{1.0, alpha, 2e3, 10e6, seed++};
      const double unit = mcsim::dephasing_integral(noise, {n, tau, 0.0}, 1.0);
      const double s = 1.0 / std::sqrt(unit);  // chi = 1 at tau
      const std::vector<double> taus{tau};
      const auto sim = mcsim::simulate_sequence(noise, {n, tau, 0.0}, taus, s, 10000, tau / (20.0 * n));
      const double chi = mcsim::dephasing_integral(noise, {n, tau, 0.0}, s);
      const double err = std::abs(-std::log(sim.coherence[0]) - chi) / chi;
      worst = std::max(worst, err);
      if (err >= 0.10) c.expect(false, "alpha=" + fmt("%.1f", alpha) + " N=" + std::to_string(n));
    }
  }
  c.note("max |-ln c - chi|/chi = " + fmt("%.4f", worst));
  c.expect(worst < 0.10, "all (alpha, N) within 10%");
}

void echo_refocusing(Checks& c) {
  const mcsim::SyntheticNoise slow{1.0, 0.0, 100.0, 1000.0, 77};
  const double tau = 20e-6;
  const double s = std::sqrt(2.0 * 2.0 / mcsim::band_variance(slow)) / tau;  // <phi^2> = 4 at tau
  const std::vector<double> taus{tau};
  const auto ramsey = mcsim::simulate_sequence(slow, {0, tau, 0.0}, taus, s, 10000, 0.25e-6);
  const auto echo = mcsim::simulate_sequence(slow, {1, tau, 0.0}, taus, s, 10000, 0.25e-6);
  c.note("Ramsey = " + fmt("%.4f", ramsey.coherence[0]) + ", echo = " + fmt("%.5f", echo.coherence[0]));
  c.expect(ramsey.coherence[0] < 0.5, "Ramsey below 0.5");
  c.expect(echo.coherence[0] >= 0.99, "echo at least 0.99");
}

void periodogram_checks(Checks& c) {
  double worst = 0.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(3.0, 2.0);
  for (std::size_t n : {8u, 9u, 100u, 1023u, 4096u, 10001u}) {
    noisespec::FrequencySeries fs;
    for (std::size_t i = 0; i < n; ++i) {
      fs.timestamps.push_back(0.5 * static_cast<double>(i));
      fs.freqs.push_back(5e9 + 1e3 * g(rng));
    }
    const auto psd = noisespec::periodogram(fs);
    const double df = 1.0 / (static_cast<double>(n) * 0.5);
    double sum = 0.0;
    for (const auto& p : psd) sum += p.value * df;
    const double mean = std::accumulate(fs.freqs.begin(), fs.freqs.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double f : fs.freqs) var += (f - mean) * (f - mean);
    var /= static_cast<double>(n);
    worst = std::max(worst, std::abs(sum / var - 1.0));
  }
  c.note("Parseval max rel err = " + fmt("%.2g", worst));
  c.expect(worst <= 1e-9, "Parseval");

  const auto tr = mcsim::synthesize_noise({1.0, 1.11, 1.0 / 3600.0, 0.5, 42}, 1.0, 3600);
  noisespec::FrequencySeries fs;
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    fs.timestamps.push_back(static_cast<double>(i));
    fs.freqs.push_back(5.065e9 + 1e3 * tr.samples[i]);
  }
  std::vector<noisespec::PSDPoint> band;
  for (const auto& p : noisespec::periodogram(fs))
    if (p.freq >= 1e-3 && p.freq <= 1e-1) band.push_back(p);
  const double exponent = noisespec::powerlaw_fit(band).exponent;
  c.note("drift exponent = " + fmt("%.3f", exponent));
  c.expect(std::abs(exponent - 1.11) <= 0.2, "drift exponent within 0.2");
}

void fit_recovery(Checks& c) {
  using namespace decayfit;
  std::ostringstream notes;

  // Relaxation.
  {
    DecayTrace t{linspace(0.0, 60e-6, 61), {}, TraceKind::relaxation, 0};
    for (double x : t.times) t.populations.push_back(0.05 + 0.9 * std::exp(-x / 11.6e-6));
    c.expect(within_rel(*fit_relaxation(t).t1, 11.6e-6, 1e-3), "relaxation noiseless");
    std::vector<double> err;
    for (unsigned seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> n(0.0, 0.02);
      auto noisy = t;
      for (auto& p : noisy.populations) p += n(rng);
      err.push_back(std::abs(*fit_relaxation(noisy).t1 / 11.6e-6 - 1.0));
    }
    notes << "T1 median err " << fmt("%.4f", median(err));
    c.expect(median(err) < 0.03, "relaxation noisy median");
  }
  // Ramsey.
  {
    DecayTrace t{linspace(0.0, 20e-6, 201), {}, TraceKind::ramsey, 0};
    for (double x : t.times)
      t.populations.push_back(0.5 + 0.45 * std::exp(-x / 8.2e-6) * std::cos(kTwoPi * 0.5e6 * x + 0.3));
    const auto f = fit_ramsey(t);
    c.expect(within_rel(f.t2, 8.2e-6, 0.01) && within_rel(*f.detuning, 0.5e6, 0.01), "Ramsey noiseless");
  }
  // CPMG.
  {
    CoherenceFit truth;
    truth.offset = 0.5;
    truth.amplitude = 0.45;
    truth.t_phi = 5e-6;
    truth.stretch = 2.5;
    DecayTrace t{linspace(0.5e-6, 30e-6, 80), {}, TraceKind::cpmg, 4};
    for (double x : t.times) t.populations.push_back(cpmg_decay_model(truth, 11.94e-6, x));
    const auto f = fit_cpmg(t, 11.94e-6);
    c.expect(within_rel(*f.t_phi, 5e-6, 0.03) && within_rel(f.stretch, 2.5, 0.03), "CPMG noiseless");
  }
  // Scaling.
  {
    std::vector<ScalingPoint> pts;
    for (int n : {1, 2, 4, 8, 16}) pts.push_back({n, 2e-6 * std::pow(n, 0.47)});
    const auto f = fit_scaling(pts);
    c.expect(std::abs(f.beta - 0.47) < 1e-9 && std::abs(f.alpha - 0.47 / 0.53) < 1e-9, "scaling noiseless");
  }
  // Dispersion.
  {
    const spectro::QubitDispersion truth{5.065_GHz, 2.348_GHz / 1.0_mV, 0.05_mV};
    std::vector<spectro::VoltagePoint> pts;
    for (double v : linspace(-1.1_mV, 1.1_mV, 31)) pts.push_back({v, spectro::qubit_frequency(truth, v - truth.v_ss)});
    const auto f = spectro::fit_dispersion(pts);
    c.expect(within_rel(f.params.f_ss, truth.f_ss, 1e-4) && within_rel(f.params.lever_c, truth.lever_c, 1e-4),
             "dispersion noiseless");
    int ok = 0;
    for (unsigned seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> n(0.0, 1e-3);
      auto noisy = pts;
      for (auto& p : noisy) p.freq *= 1.0 + n(rng);
      const auto g = spectro::fit_dispersion(noisy);
      ok += within_rel(g.params.f_ss, truth.f_ss, 0.01) && within_rel(g.params.lever_c, truth.lever_c, 0.01);
    }
    notes << ", dispersion " << ok << "/100 within 1%";
    c.expect(ok == 100, "dispersion 0.1% noise");
  }
  // Transmission.
  {
    const spectro::CavityQubitParams truth{5.668_GHz, to_angular(0.38_MHz), 5.668_GHz, to_angular(3.18_MHz),
                                           to_angular(6.43_MHz)};
    std::vector<spectro::SpectrumPoint> clean;
    for (double f : linspace(truth.f_r - 20e6, truth.f_r + 20e6, 401))
      clean.push_back({f, std::abs(spectro::transmission(truth, f))});
    const auto f = spectro::fit_transmission(clean, {truth.f_r, truth.kappa});
    c.expect(within_rel(f.g, truth.g, 0.02) && within_rel(f.gamma, truth.gamma, 0.02), "transmission noiseless");
    std::vector<double> eg, egam;
    for (unsigned seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(1000 + seed);
      std::normal_distribution<double> n(0.0, 0.01);
      auto noisy = clean;
      for (auto& p : noisy) p.amp += n(rng);
      const auto g = spectro::fit_transmission(noisy, {truth.f_r, truth.kappa});
      eg.push_back(std::abs(g.g / truth.g - 1.0));
      egam.push_back(std::abs(g.gamma / truth.gamma - 1.0));
    }
    notes << ", g median err " << fmt("%.4f", median(eg)) << ", gamma median err " << fmt("%.4f", median(egam));
    c.expect(median(eg) < 0.05 && median(egam) < 0.05, "transmission 1% noise median");
  }
  // Power law.
  {
    std::vector<noisespec::PSDPoint> pts;
    for (double f : {1e4, 3e4, 1e5, 3e5, 1e6}) pts.push_back({f, 7e12 * std::pow(f, -1.55)});
    c.expect(std::abs(noisespec::powerlaw_fit(pts).exponent - 1.55) < 1e-6, "power law noiseless");
    std::vector<double> err;
    for (unsigned seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> n(0.0, 0.2);
      auto noisy = pts;
      for (auto& p : noisy) p.value *= std::exp(n(rng));
      err.push_back(std::abs(noisespec::powerlaw_fit(noisy).exponent - 1.55));
    }
    notes << ", power-law median |d alpha| " << fmt("%.3f", median(err));
    c.expect(median(err) < 0.15, "power law scatter median");
  }
  c.note(notes.str());
}

void voltage_noise(Checks& c) {
  const auto sv = noisespec::to_voltage_noise({1e5, 1e6, noisespec::PsdUnits::freq_noise}, 180.7e6 / 1e-3);
  c.note("S_v = " + fmt("%.4g", sv.value) + " uV^2/Hz");
  c.expect(within_rel(sv.value, 3.06e-5, 0.01), "S_v");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Checks&)>>> criteria{
      {"resonator pins", resonator_pins},
      {"Purcell rate", purcell},
      {"scaling inversion", scaling_inversion},
      {"thermal pins", thermal_pins},
      {"coupling ratio", coupling},
      {"oracle round-trip", oracle_round_trip},
      {"filter integral vs Monte Carlo", filter_vs_monte_carlo},
      {"echo refocusing", echo_refocusing},
      {"periodogram", periodogram_checks},
      {"fit recovery", fit_recovery},
      {"voltage-noise conversion", voltage_noise},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Checks c;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += c.ok() ? 0 : 1;
    std::printf("%s  %2zu  %-32s %7.2fs  %s\n", c.ok() ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                c.summary().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
