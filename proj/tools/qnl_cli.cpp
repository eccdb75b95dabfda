// qnl: command-line front end for the noise-spectroscopy library.

#include "qnl/ddfilter.hpp"
#include "qnl/decayfit.hpp"
#include "qnl/error.hpp"
#include "qnl/fixture.hpp"
#include "qnl/io.hpp"
#include "qnl/mcsim.hpp"
#include "qnl/noisespec.hpp"
#include "qnl/pipeline.hpp"
#include "qnl/resonator.hpp"
#include "qnl/spectro.hpp"
#include "qnl/thermal.hpp"
#include "qnl/units.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace qnl;

namespace {

struct Grid {
  double lo = 0.0, hi = 0.0;
  int steps = 0;

  std::vector<double> values() const {
    std::vector<double> v(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i)
      v[static_cast<std::size_t>(i)] = steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
    return v;
  }
};

Grid parse_grid(const std::string& s, const char* flag) {
  Grid g;
  const auto a = s.find(':');
  const auto b = a == std::string::npos ? a : s.find(':', a + 1);
  try {
    if (b == std::string::npos) throw std::invalid_argument("shape");
    std::size_t used = 0;
    g.lo = std::stod(s.substr(0, a));
    g.hi = std::stod(s.substr(a + 1, b - a - 1));
    g.steps = std::stoi(s.substr(b + 1), &used);
  } catch (const std::exception&) {
    throw InputError(std::string(flag) + ": expected min:max:steps, got '" + s + "'");
  }
  if (g.steps < 1 || !(g.hi >= g.lo)) throw InputError(std::string(flag) + ": need max >= min and steps >= 1");
  return g;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    io::write_atomic(out, text);
}

decayfit::DecayTrace load_trace(const std::string& path, const std::string& kind, int n_pulses) {
  if (kind.empty()) return io::read_decay_trace(path).trace;
  const auto t = io::read_csv(path, {"tau_s", "pe"});
  decayfit::DecayTrace tr{t.numbers("tau_s"), t.numbers("pe"), decayfit::trace_kind_from_string(kind),
                          n_pulses};
  if (tr.kind == decayfit::TraceKind::echo && n_pulses == 0) tr.n_pulses = 1;
  tr.validate();
  return tr;
}

void print_diagnostics(const std::vector<io::Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << d.describe() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qnl: noise-spectroscopy analysis for electron-on-neon charge qubits"};
  app.require_subcommand(1);
  std::string out;

  // fit-decay
  auto* fit_decay = app.add_subcommand("fit-decay", "Fit a decay trace (tau_s,pe CSV + sidecar)");
  std::string trace_path, kind;
  int n_pulses = 0;
  double t1 = std::numeric_limits<double>::infinity();
  fit_decay->add_option("trace", trace_path, "Trace CSV")->required();
  fit_decay->add_option("--kind", kind, "relaxation|ramsey|echo|cpmg (overrides the sidecar)");
  fit_decay->add_option("--n-pulses", n_pulses, "Pulse count when --kind is given");
  fit_decay->add_option("--t1", t1, "T1 in s for echo/cpmg fits (default: infinite)");
  fit_decay->add_option("-o,--out", out, "Output file (default stdout)");

  // fit-spectrum
  auto* fit_spectrum = app.add_subcommand("fit-spectrum", "Fit a transmission trace or a two-tone map");
  std::string transmission_path, two_tone_path;
  double f_r = 0.0, kappa_2pi = 0.0;
  fit_spectrum->add_option("--transmission", transmission_path, "freq_hz,amp CSV");
  fit_spectrum->add_option("--two-tone", two_tone_path, "voltage_v,freq_hz,phase_rad CSV");
  fit_spectrum->add_option("--fr", f_r, "Resonator frequency, Hz");
  fit_spectrum->add_option("--kappa", kappa_2pi, "Resonator linewidth kappa/2pi, Hz");
  fit_spectrum->add_option("-o,--out", out, "Output file (default stdout)");

  // reconstruct-psd
  auto* recon = app.add_subcommand("reconstruct-psd", "PSD point(s) from CPMG dephasing times");
  std::string points_path;
  int recon_n = 0;
  double recon_tphi = 0.0, tau_pi = 0.0, lever = 0.0;
  recon->add_option("--points", points_path, "CSV with columns n_pulses,t_phi_s");
  recon->add_option("--n", recon_n, "Pulse count (single point)");
  recon->add_option("--t-phi", recon_tphi, "Dephasing time, s (single point)");
  recon->add_option("--tau-pi", tau_pi, "pi-pulse width, s");
  recon->add_option("--lever", lever, "df_q/dV in Hz/V; adds voltage-noise rows");
  recon->add_option("-o,--out", out, "Output file (default stdout)");

  // periodogram
  auto* perio = app.add_subcommand("periodogram", "One-sided periodogram of a t_s,freq_hz series");
  std::string series_path;
  perio->add_option("series", series_path, "Series CSV")->required();
  perio->add_option("-o,--out", out, "Output file (default stdout)");

  // powerlaw-fit
  auto* plfit = app.add_subcommand("powerlaw-fit", "Fit S = A / f^alpha to a PSD CSV");
  std::string psd_path, units_filter;
  double f_lo = 0.0, f_hi = std::numeric_limits<double>::infinity();
  plfit->add_option("psd", psd_path, "freq_hz,psd,units CSV")->required();
  plfit->add_option("--fmin", f_lo, "Lower band edge, Hz");
  plfit->add_option("--fmax", f_hi, "Upper band edge, Hz");
  plfit->add_option("--units", units_filter, "Only rows with these units");
  plfit->add_option("-o,--out", out, "Output file (default stdout)");

  // thermal-model
  auto* therm = app.add_subcommand("thermal-model", "Temperature curves: T1, P_e, n_th, resonator dephasing");
  double fq = 0.0, fr = 0.0, kappa = 0.0, chi = 0.0, t1_zero = 0.0;
  std::string temps = "0.01:0.5:50";
  therm->add_option("--fq", fq, "Qubit frequency, Hz")->required();
  therm->add_option("--fr", fr, "Resonator frequency, Hz")->required();
  therm->add_option("--kappa", kappa, "kappa/2pi, Hz")->required();
  therm->add_option("--chi", chi, "Reported chi/pi, Hz")->required();
  therm->add_option("--t1-zero", t1_zero, "T1 at zero temperature, s")->required();
  therm->add_option("--temps", temps, "Temperature grid tmin:tmax:steps in K");
  therm->add_option("-o,--out", out, "Output file (default stdout)");

  // resonator-calc
  auto* reso = app.add_subcommand("resonator-calc", "Kinetic inductance and lumped model");
  double tc = 0.0, rsq = 0.0, width = 0.0, length = 0.0, fdiff = 0.0;
  reso->add_option("--tc", tc, "Critical temperature, K")->required();
  reso->add_option("--rsq", rsq, "Sheet resistance, Ohm")->required();
  reso->add_option("--width", width, "Strip width, m")->required();
  reso->add_option("--length", length, "Strip length, m")->required();
  reso->add_option("--fdiff", fdiff, "Differential-mode frequency, Hz")->required();
  reso->add_option("-o,--out", out, "Output file (default stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo decay under 1/f^alpha noise");
  double alpha = 1.0, amplitude = 0.0, sensitivity = 1.0, dt = 0.0;
  std::optional<double> f_min;
  double f_max = 0.0;
  int sim_n = 0;
  std::string tau_grid;
  std::size_t n_traj = 1000;
  std::uint64_t seed = 0;
  sim->add_option("--alpha", alpha, "Spectral exponent")->required();
  sim->add_option("--amplitude", amplitude, "One-sided PSD at 1 Hz, units^2/Hz")->required();
  sim->add_option("--n-pulses", sim_n, "Pulse count (0 = Ramsey)")->required();
  sim->add_option("--tau-grid", tau_grid, "tmin:tmax:steps in s")->required();
  sim->add_option("--n-traj", n_traj, "Trajectories");
  sim->add_option("--seed", seed, "Random seed (QNL_SEED overrides)");
  sim->add_option("--sensitivity", sensitivity, "d omega_q / d lambda, rad/s per unit");
  sim->add_option("--tau-pi", tau_pi, "pi-pulse width, s");
  sim->add_option("--fmin", f_min, "Infrared cutoff, Hz (default 1/(100 tau_max))");
  sim->add_option("--fmax", f_max, "Upper band edge, Hz (default 1/(4 dt))");
  sim->add_option("--dt", dt, "Time step, s (default tau_min/(10 max(N,1)))");
  sim->add_option("-o,--out", out, "Output CSV (a sidecar is written next to it)");

  // filter-fn
  auto* filt = app.add_subcommand("filter-fn", "Filter function g_N on a frequency grid");
  int filt_n = 0;
  double filt_tau = 0.0;
  std::string grid;
  filt->add_option("--n", filt_n, "Pulse count")->required();
  filt->add_option("--tau", filt_tau, "Total free evolution, s")->required();
  filt->add_option("--tau-pi", tau_pi, "pi-pulse width, s");
  filt->add_option("--grid", grid, "fmin:fmax:steps in Hz")->required();
  filt->add_option("-o,--out", out, "Output file (default stdout)");

  // run / validate
  auto* run = app.add_subcommand("run", "Full pipeline from a JSON config");
  std::string config_path, out_dir;
  run->add_option("config", config_path, "Config JSON")->required();
  run->add_option("--out-dir", out_dir, "Override the configured output directory");
  auto* validate = app.add_subcommand("validate", "Check a config and its inputs");
  validate->add_option("config", config_path, "Config JSON")->required();

  // make-fixture
  auto* make_fixture = app.add_subcommand("make-fixture", "Write the synthetic Q1 dataset and config");
  std::string fixture_dir;
  make_fixture->add_option("dir", fixture_dir, "Output directory")->required();
  make_fixture->add_option("--seed", seed, "Random seed (QNL_SEED overrides)");

  CLI11_PARSE(app, argc, argv);

  auto env_seed = [&]() {
    if (const char* env = std::getenv("QNL_SEED"); env && *env) seed = std::stoull(env);
  };

  try {
    if (fit_decay->parsed()) {
      const auto tr = load_trace(trace_path, kind, n_pulses);
      decayfit::CoherenceFit fit;
      switch (tr.kind) {
        case decayfit::TraceKind::relaxation: fit = decayfit::fit_relaxation(tr); break;
        case decayfit::TraceKind::ramsey: fit = decayfit::fit_ramsey(tr); break;
        default: fit = decayfit::fit_cpmg(tr, t1); break;
      }
      for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
      emit(out, pipeline::fit_to_json(fit));
    } else if (fit_spectrum->parsed()) {
      if (transmission_path.empty() == two_tone_path.empty())
        throw InputError("fit-spectrum: give exactly one of --transmission or --two-tone");
      if (!transmission_path.empty()) {
        const auto fit = spectro::fit_transmission(io::read_spectrum(transmission_path), {f_r, to_angular(kappa_2pi)});
        for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
        emit(out, pipeline::fit_to_json(fit));
      } else {
        emit(out, pipeline::fit_to_json(spectro::fit_dispersion(io::extract_qubit_line(io::read_two_tone(two_tone_path)))));
      }
    } else if (recon->parsed()) {
      std::vector<std::pair<int, double>> pts;
      if (!points_path.empty()) {
        const auto t = io::read_csv(points_path, {"n_pulses", "t_phi_s"});
        for (std::size_t i = 0; i < t.rows(); ++i)
          pts.emplace_back(static_cast<int>(t.number(i, "n_pulses")), t.number(i, "t_phi_s"));
      } else {
        if (recon_n < 1 || !(recon_tphi > 0.0))
          throw InputError("reconstruct-psd: give --points or both --n and --t-phi");
        pts.emplace_back(recon_n, recon_tphi);
      }
      std::vector<noisespec::PSDPoint> rows, volts;
      for (const auto& [n, tphi] : pts) {
        rows.push_back(noisespec::reconstruct_psd_point(tphi, {n, 1.0, tau_pi}));
        if (lever != 0.0) volts.push_back(noisespec::to_voltage_noise(rows.back(), lever));
      }
      rows.insert(rows.end(), volts.begin(), volts.end());
      emit(out, io::psd_csv(rows));
    } else if (perio->parsed()) {
      emit(out, io::psd_csv(noisespec::periodogram(io::read_frequency_series(series_path))));
    } else if (plfit->parsed()) {
      std::vector<noisespec::PSDPoint> pts;
      for (const auto& p : io::read_psd(psd_path)) {
        if (!units_filter.empty() && noisespec::to_string(p.units) != units_filter) continue;
        if (p.freq >= f_lo && p.freq <= f_hi) pts.push_back(p);
      }
      emit(out, pipeline::fit_to_json(noisespec::powerlaw_fit(pts)));
    } else if (therm->parsed()) {
      const thermal::ThermalModel m{fq, fr, to_angular(kappa), thermal::chi_from_reported(chi), t1_zero};
      m.validate();
      std::vector<std::vector<double>> rows;
      for (double T : parse_grid(temps, "--temps").values()) {
        const double n_th = thermal::photon_occupation(fr, T);
        rows.push_back({T, thermal::t1_vs_temperature(m, T), thermal::thermal_population(fq, T), n_th,
                        thermal::resonator_dephasing(m, n_th)});
      }
      emit(out, io::csv_text({"temp_k", "t1_s", "pe", "n_th", "gamma_phi"}, rows));
    } else if (reso->parsed()) {
      const double lk = resonator::kinetic_inductance({tc, rsq});
      const auto m = resonator::lumped_model(lk, width, length, fdiff);
      const nlohmann::json j = {{"l_k", lk},           {"l_diff", m.l_diff}, {"c_diff", m.c_diff},
                                {"z_diff", m.z_diff},  {"f_diff", m.f_diff}, {"l_per_length", m.l_per_length},
                                {"length", m.length},  {"width", m.width}};
      emit(out, j.dump(2) + "\n");
    } else if (sim->parsed()) {
      env_seed();
      const auto taus = parse_grid(tau_grid, "--tau-grid").values();
      if (dt == 0.0) dt = taus.front() / (10.0 * std::max(sim_n, 1));
      const mcsim::SyntheticNoise spec{amplitude, alpha, f_min.value_or(1.0 / (100.0 * taus.back())),
                                       f_max > 0.0 ? f_max : 0.25 / dt, seed};
      const auto r = mcsim::simulate_sequence(spec, {sim_n, taus.back(), tau_pi}, taus, sensitivity, n_traj, dt);
      if (r.band_clipped) std::cerr << "warning: requested band exceeds the simulation's Fourier grid\n";
      emit(out, io::trace_csv(r.trace));
      if (!out.empty() && out != "-")
        io::write_atomic(io::sidecar_path(out), io::sidecar_json({r.trace.kind, r.trace.n_pulses, 0.0, 0.0}));
    } else if (filt->parsed()) {
      const ddfilter::PulseSequence seq{filt_n, filt_tau, tau_pi};
      seq.validate();
      const auto freqs = parse_grid(grid, "--grid").values();
      std::vector<double> omegas;
      for (double f : freqs) omegas.push_back(to_angular(f));
      const auto g = ddfilter::filter_scan(seq, omegas);
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < freqs.size(); ++i) rows.push_back({freqs[i], g[i]});
      emit(out, io::csv_text({"freq_hz", "g"}, rows));
    } else if (validate->parsed()) {
      const auto config = pipeline::load_config(config_path);
      const auto diags = pipeline::validate_inputs(config);
      print_diagnostics(diags);
      if (pipeline::has_errors(diags)) return 1;
      std::cout << "ok\n";
    } else if (run->parsed()) {
      const auto config = pipeline::load_config(config_path);
      const auto warnings = pipeline::validate_inputs(config);
      if (pipeline::has_errors(warnings)) {
        print_diagnostics(warnings);
        return 1;
      }
      print_diagnostics(warnings);
      const auto report = pipeline::run_pipeline(config);
      const fs::path dir = out_dir.empty() ? config.resolve(config.output_dir) : fs::path(out_dir);
      pipeline::write_report(report, dir);
      auto show = [](const char* name, const std::optional<double>& v, double scale, const char* unit) {
        if (v) std::cout << name << " = " << *v * scale << " " << unit << "\n";
      };
      show("T1", report.t1(), 1e6, "us");
      show("T2*", report.t2_star(), 1e6, "us");
      show("T2echo", report.t2_echo(), 1e6, "us");
      if (report.scaling_average)
        std::cout << "beta = " << report.scaling_average->beta << ", alpha = " << report.scaling_average->alpha << "\n";
      std::cout << "report written to " << (dir / "report.json").string() << "\n";
    } else if (make_fixture->parsed()) {
      env_seed();
      std::cout << fixture::write_q1_fixture(fixture_dir, seed).string() << "\n";
    }
  } catch (const InputError& e) {
    std::cerr << "qnl: input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "qnl: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
