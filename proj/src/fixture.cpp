#include "qnl/fixture.hpp"

#include "qnl/decayfit.hpp"
#include "qnl/io.hpp"
#include "qnl/mcsim.hpp"
#include "qnl/spectro.hpp"
#include "qnl/units.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace qnl::fixture {

namespace fs = std::filesystem;
using decayfit::TraceKind;

namespace {

void write_trace(const fs::path& dir, const std::string& stem, const std::vector<double>& t,
                 const std::vector<double>& pe, const io::TraceMetadata& meta) {
  decayfit::DecayTrace tr{t, pe, meta.kind, meta.n_pulses};
  io::write_atomic(dir / (stem + ".csv"), io::trace_csv(tr));
  io::write_atomic(dir / (stem + ".json"), io::sidecar_json(meta));
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return v;
}

}  // namespace

fs::path write_q1_fixture(const fs::path& dir, std::uint64_t seed, const Q1Truth& q) {
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  nlohmann::json datasets = nlohmann::json::array();
  auto add = [&](const std::string& path, const char* role) {
    datasets.push_back({{"path", path}, {"role", role}});
  };

  // Sweet-spot relaxation, Ramsey and echo from their closed forms.
  {
    const auto t = linspace(0.0, 60e-6, 61);
    std::vector<double> pe;
    for (double x : t) pe.push_back(0.05 + 0.9 * std::exp(-x / q.t1) + 0.01 * noise(rng));
    write_trace(dir, "q1_t1", t, pe, {TraceKind::relaxation, 0, 0.0, 10.0});
    add("q1_t1.csv", "decay");
  }
  {
    const auto t = linspace(0.0, 20e-6, 201);
    std::vector<double> pe;
    for (double x : t)
      pe.push_back(0.5 + 0.45 * std::exp(-x / q.t2_star) * std::cos(kTwoPi * q.ramsey_detuning * x) +
                   0.01 * noise(rng));
    write_trace(dir, "q1_ramsey", t, pe, {TraceKind::ramsey, 0, 0.0, 10.0});
    add("q1_ramsey.csv", "decay");
  }
  {
    // Gaussian dephasing term chosen so the 1/e time equals t2_echo.
    const double x = q.t2_echo / (2.0 * q.t1);
    const double t_phi = q.t2_echo / std::sqrt(1.0 - x);
    decayfit::CoherenceFit model;
    model.t_phi = t_phi;
    model.stretch = 2.0;
    model.amplitude = 0.45;
    model.offset = 0.5;
    const auto t = linspace(0.5e-6, 60e-6, 60);
    std::vector<double> pe;
    for (double v : t) pe.push_back(decayfit::cpmg_decay_model(model, q.t1, v) + 0.01 * noise(rng));
    write_trace(dir, "q1_echo", t, pe, {TraceKind::echo, 1, 0.0, 10.0});
    add("q1_echo.csv", "decay");
  }

  // CPMG away from the sweet spot: Monte Carlo dephasing times a T1 envelope.
  const spectro::QubitDispersion disp{q.f_ss, q.lever_c, 0.0};
  const double dv = spectro::offset_for_detuning(disp, q.bias_detuning);
  const double sensitivity = kTwoPi * spectro::lever_arm(disp, dv);  // rad/s per V
  mcsim::SyntheticNoise charge{1.0, q.alpha, 2e3, 20e6, seed ^ 0x5eedULL};
  const double unit = mcsim::dephasing_integral(charge, {1, q.t_phi_echo_bias, 0.0}, sensitivity);
  charge.amplitude = 1.0 / unit;
  for (int n : q.pulse_counts) {
    const double t_phi_guess = q.t_phi_echo_bias * std::pow(n, q.alpha / (1.0 + q.alpha));
    const double t_max = std::min(3.0 * t_phi_guess, 4.0 * q.t1);
    const auto taus = linspace(t_max / 25.0, t_max, 25);
    const double dt = taus.front() / (10.0 * n);
    const auto sim = mcsim::simulate_sequence(charge, {n, t_max, 0.0}, taus, sensitivity, q.n_traj, dt);
    std::vector<double> pe;
    for (std::size_t i = 0; i < taus.size(); ++i)
      pe.push_back(0.5 + 0.45 * std::exp(-taus[i] / (2.0 * q.t1)) * sim.coherence[i] +
                   0.005 * noise(rng));
    const std::string stem = "q1_cpmg_n" + std::to_string(n);
    write_trace(dir, stem, taus, pe, {n == 1 ? TraceKind::echo : TraceKind::cpmg, n, dv * 1e3, 10.0});
    add(stem + ".csv", "decay");
  }

  // Two-tone map: phase response peaked on the qubit line.
  {
    std::vector<std::vector<double>> rows;
    for (const double v : linspace(-1.1e-3, 1.1e-3, 23)) {
      const double fq = spectro::qubit_frequency(disp, v);
      for (const double f : linspace(4.95e9, 5.75e9, 161)) {
        const double x = (f - fq) / 4e6;
        rows.push_back({v, f, 0.8 / (1.0 + x * x) + 0.02 * noise(rng)});
      }
    }
    io::write_atomic(dir / "q1_two_tone.csv", io::csv_text({"voltage_v", "freq_hz", "phase_rad"}, rows));
    add("q1_two_tone.csv", "two_tone");
  }

  // On-resonance transmission.
  {
    const spectro::CavityQubitParams p{q.f_r, to_angular(q.kappa_2pi), q.f_r, to_angular(q.gamma_2pi),
                                       to_angular(q.g_2pi)};
    std::vector<std::vector<double>> rows;
    for (const double f : linspace(q.f_r - 20e6, q.f_r + 20e6, 801))
      rows.push_back({f, std::abs(spectro::transmission(p, f)) + 0.01 * noise(rng)});
    io::write_atomic(dir / "q1_transmission.csv", io::csv_text({"freq_hz", "amp"}, rows));
    add("q1_transmission.csv", "spectrum");
  }

  // One hour of sweet-spot frequency tracking.
  {
    const mcsim::SyntheticNoise drift{1e3, q.drift_alpha, 1.0 / 3600.0, 0.5, seed ^ 0xd1f7ULL};
    const auto tr = mcsim::synthesize_noise(drift, 1.0, 3600);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < tr.samples.size(); ++i)
      rows.push_back({static_cast<double>(i), q.f_ss + tr.samples[i]});
    io::write_atomic(dir / "q1_drift.csv", io::csv_text({"t_s", "freq_hz"}, rows));
    add("q1_drift.csv", "series");
  }

  const nlohmann::json config = {
      {"qubit",
       {{"name", "Q1"},
        {"f_ss_hz", q.f_ss},
        {"lever_c_hz_per_v", q.lever_c},
        {"v_ss_v", 0.0},
        {"f_r_hz", q.f_r},
        {"kappa_over_2pi_hz", q.kappa_2pi},
        {"chi_over_pi_hz", q.chi_over_pi},
        {"t1_s", 0.0},
        {"g_over_2pi_hz", 0.0},
        {"tau_pi_s", 0.0}}},
      {"datasets", datasets},
      {"output_dir", "report"},
      {"seed", seed},
      {"temperatures", {{"min_k", 0.01}, {"max_k", 0.5}, {"steps", 50}}}};
  const fs::path path = dir / "config.json";
  io::write_atomic(path, config.dump(2) + "\n");
  return path;
}

}  // namespace qnl::fixture
