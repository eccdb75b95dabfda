#include "qnl/pipeline.hpp"

#include "qnl/error.hpp"
#include "qnl/thermal.hpp"
#include "qnl/units.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <ctime>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#ifndef QNL_VERSION
#define QNL_VERSION "0.0.0"
#endif
#ifndef QNL_REFERENCE_TABLE
#define QNL_REFERENCE_TABLE "reference/charge_noise_table.csv"
#endif

namespace qnl::pipeline {

using nlohmann::json;
using decayfit::TraceKind;

std::string to_string(DatasetRole r) {
  switch (r) {
    case DatasetRole::decay: return "decay";
    case DatasetRole::spectrum: return "spectrum";
    case DatasetRole::two_tone: return "two_tone";
    case DatasetRole::series: return "series";
  }
  return "decay";
}

DatasetRole dataset_role_from_string(const std::string& s) {
  if (s == "decay") return DatasetRole::decay;
  if (s == "spectrum") return DatasetRole::spectrum;
  if (s == "two_tone") return DatasetRole::two_tone;
  if (s == "series") return DatasetRole::series;
  throw InputError("unknown dataset role '" + s + "'");
}

bool AnalysisConfig::runs(const std::string& stage) const {
  return std::find(pipelines.begin(), pipelines.end(), stage) != pipelines.end();
}

fs::path AnalysisConfig::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
}

namespace {

// JSON cannot hold non-finite doubles; they travel as strings.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double as_num(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw InputError("expected a number, got " + j.dump());
}

json opt(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

std::optional<double> as_opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return as_num(j);
}

json fit_json(const decayfit::CoherenceFit& f) {
  return {{"t1", opt(f.t1)},
          {"t2", num(f.t2)},
          {"t_phi", opt(f.t_phi)},
          {"stretch", num(f.stretch)},
          {"amplitude", num(f.amplitude)},
          {"offset", num(f.offset)},
          {"detuning", opt(f.detuning)},
          {"phase", num(f.phase)},
          {"t1_err", num(f.t1_err)},
          {"t2_err", num(f.t2_err)},
          {"t_phi_err", num(f.t_phi_err)},
          {"stretch_err", num(f.stretch_err)},
          {"amplitude_err", num(f.amplitude_err)},
          {"offset_err", num(f.offset_err)},
          {"detuning_err", num(f.detuning_err)},
          {"residual_norm", num(f.residual_norm)},
          {"initial_residual_norm", num(f.initial_residual_norm)},
          {"low_confidence", f.low_confidence},
          {"detuning_unconstrained", f.detuning_unconstrained},
          {"stretch_at_bound", f.stretch_at_bound},
          {"warnings", f.warnings}};
}

decayfit::CoherenceFit fit_from(const json& j) {
  decayfit::CoherenceFit f;
  f.t1 = as_opt(j.at("t1"));
  f.t2 = as_num(j.at("t2"));
  f.t_phi = as_opt(j.at("t_phi"));
  f.stretch = as_num(j.at("stretch"));
  f.amplitude = as_num(j.at("amplitude"));
  f.offset = as_num(j.at("offset"));
  f.detuning = as_opt(j.at("detuning"));
  f.phase = as_num(j.at("phase"));
  f.t1_err = as_num(j.at("t1_err"));
  f.t2_err = as_num(j.at("t2_err"));
  f.t_phi_err = as_num(j.at("t_phi_err"));
  f.stretch_err = as_num(j.at("stretch_err"));
  f.amplitude_err = as_num(j.at("amplitude_err"));
  f.offset_err = as_num(j.at("offset_err"));
  f.detuning_err = as_num(j.at("detuning_err"));
  f.residual_norm = as_num(j.at("residual_norm"));
  f.initial_residual_norm = as_num(j.at("initial_residual_norm"));
  f.low_confidence = j.at("low_confidence").get<bool>();
  f.detuning_unconstrained = j.at("detuning_unconstrained").get<bool>();
  f.stretch_at_bound = j.at("stretch_at_bound").get<bool>();
  f.warnings = j.at("warnings").get<std::vector<std::string>>();
  return f;
}

json scaling_json(const decayfit::ScalingFit& s) {
  return {{"beta", num(s.beta)},
          {"alpha", num(s.alpha)},
          {"beta_err", num(s.beta_err)},
          {"alpha_err", num(s.alpha_err)},
          {"prefactor", num(s.prefactor)}};
}

decayfit::ScalingFit scaling_from(const json& j) {
  return {as_num(j.at("beta")), as_num(j.at("alpha")), as_num(j.at("beta_err")),
          as_num(j.at("alpha_err")), as_num(j.at("prefactor"))};
}

json powerlaw_json(const noisespec::PowerLawFit& p) {
  return {{"amplitude", num(p.amplitude)},
          {"exponent", num(p.exponent)},
          {"amplitude_err", num(p.amplitude_err)},
          {"exponent_err", num(p.exponent_err)}};
}

noisespec::PowerLawFit powerlaw_from(const json& j) {
  return {as_num(j.at("amplitude")), as_num(j.at("exponent")), as_num(j.at("amplitude_err")),
          as_num(j.at("exponent_err"))};
}

json psd_point_json(const noisespec::PSDPoint& p) {
  return {{"freq", num(p.freq)}, {"value", num(p.value)}, {"units", noisespec::to_string(p.units)}};
}

noisespec::PSDPoint psd_point_from(const json& j) {
  return {as_num(j.at("freq")), as_num(j.at("value")),
          noisespec::psd_units_from_string(j.at("units").get<std::string>())};
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const std::set<std::string> kConfigKeys = {"qubit",          "datasets",    "pipelines",
                                           "output_dir",     "seed",        "temperatures",
                                           "drift_band_hz",  "reference_table"};
const std::set<std::string> kQubitKeys = {"name",  "f_ss_hz", "lever_c_hz_per_v", "v_ss_v",
                                          "f_r_hz", "kappa_over_2pi_hz", "chi_over_pi_hz",
                                          "t1_s",  "g_over_2pi_hz", "tau_pi_s"};

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw InputError("config: unknown key '" + k + "' in " + where);
}

double config_num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw InputError(std::string("config: '") + key + "' must be numeric");
  return j[key].get<double>();
}

}  // namespace

AnalysisConfig config_from_json(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config: top level must be an object");
  reject_unknown(j, kConfigKeys, "config");

  AnalysisConfig c;
  c.base_dir = base_dir;
  if (j.contains("qubit")) {
    const auto& q = j["qubit"];
    if (!q.is_object()) throw InputError("config: 'qubit' must be an object");
    reject_unknown(q, kQubitKeys, "qubit");
    c.qubit.name = q.value("name", std::string{});
    c.qubit.f_ss = config_num(q, "f_ss_hz", 0.0);
    c.qubit.lever_c = config_num(q, "lever_c_hz_per_v", 0.0);
    c.qubit.v_ss = config_num(q, "v_ss_v", 0.0);
    c.qubit.f_r = config_num(q, "f_r_hz", 0.0);
    c.qubit.kappa = to_angular(config_num(q, "kappa_over_2pi_hz", 0.0));
    c.qubit.chi = thermal::chi_from_reported(config_num(q, "chi_over_pi_hz", 0.0));
    c.qubit.t1 = config_num(q, "t1_s", 0.0);
    c.qubit.g = to_angular(config_num(q, "g_over_2pi_hz", 0.0));
    c.qubit.tau_pi = config_num(q, "tau_pi_s", 0.0);
  }
  if (j.contains("datasets")) {
    if (!j["datasets"].is_array()) throw InputError("config: 'datasets' must be an array");
    for (const auto& d : j["datasets"]) {
      if (!d.is_object() || !d.contains("path") || !d["path"].is_string())
        throw InputError("config: each dataset needs a string 'path'");
      reject_unknown(d, {"path", "role"}, "dataset");
      c.datasets.push_back({d["path"].get<std::string>(),
                            dataset_role_from_string(d.value("role", std::string("decay")))});
    }
  }
  if (j.contains("pipelines")) c.pipelines = j["pipelines"].get<std::vector<std::string>>();
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw InputError("config: 'seed' must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("temperatures")) {
    const auto& t = j["temperatures"];
    reject_unknown(t, {"min_k", "max_k", "steps"}, "temperatures");
    c.temperatures.t_min = config_num(t, "min_k", c.temperatures.t_min);
    c.temperatures.t_max = config_num(t, "max_k", c.temperatures.t_max);
    c.temperatures.steps = static_cast<int>(config_num(t, "steps", c.temperatures.steps));
  }
  if (j.contains("drift_band_hz")) {
    const auto band = j["drift_band_hz"].get<std::vector<double>>();
    if (band.size() != 2) throw InputError("config: 'drift_band_hz' needs two values");
    c.drift_f_min = band[0];
    c.drift_f_max = band[1];
  }
  if (j.contains("reference_table")) c.reference_table = j["reference_table"].get<std::string>();
  return c;
}

std::string config_to_json(const AnalysisConfig& c) {
  json datasets = json::array();
  for (const auto& d : c.datasets) datasets.push_back({{"path", d.path}, {"role", to_string(d.role)}});
  json j = {{"qubit",
             {{"name", c.qubit.name},
              {"f_ss_hz", c.qubit.f_ss},
              {"lever_c_hz_per_v", c.qubit.lever_c},
              {"v_ss_v", c.qubit.v_ss},
              {"f_r_hz", c.qubit.f_r},
              {"kappa_over_2pi_hz", to_hz(c.qubit.kappa)},
              {"chi_over_pi_hz", c.qubit.chi / std::numbers::pi},
              {"t1_s", c.qubit.t1},
              {"g_over_2pi_hz", to_hz(c.qubit.g)},
              {"tau_pi_s", c.qubit.tau_pi}}},
            {"datasets", datasets},
            {"pipelines", c.pipelines},
            {"output_dir", c.output_dir},
            {"seed", c.seed},
            {"temperatures",
             {{"min_k", c.temperatures.t_min},
              {"max_k", c.temperatures.t_max},
              {"steps", c.temperatures.steps}}},
            {"drift_band_hz", {c.drift_f_min, c.drift_f_max}},
            {"reference_table", c.reference_table}};
  return j.dump(2);
}

AnalysisConfig load_config(const fs::path& path) {
  auto c = config_from_json(io::read_text(path), path.parent_path());
  if (const char* env = std::getenv("QNL_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw InputError(std::string("QNL_SEED: not an unsigned integer '") + env + "'");
    c.seed = v;
  }
  return c;
}

bool has_errors(const std::vector<io::Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const auto& d) { return d.severity == io::Severity::error; });
}

namespace {

fs::path reference_path(const AnalysisConfig& c) {
  return c.reference_table.empty() ? fs::path(QNL_REFERENCE_TABLE) : c.resolve(c.reference_table);
}

bool any_role(const AnalysisConfig& c, DatasetRole role) {
  return std::any_of(c.datasets.begin(), c.datasets.end(),
                     [&](const Dataset& d) { return d.role == role; });
}

}  // namespace

std::vector<io::Diagnostic> validate_inputs(const AnalysisConfig& c) {
  using io::Diagnostic;
  using io::Severity;
  std::vector<Diagnostic> out;
  auto config_error = [&](const std::string& field, const std::string& msg) {
    out.push_back({"config", field, -1, Severity::error, msg});
  };

  if (c.datasets.empty()) config_error("datasets", "no datasets listed");
  for (const auto& stage : c.pipelines)
    if (std::find(kAllStages.begin(), kAllStages.end(), stage) == kAllStages.end())
      config_error("pipelines", "unknown stage '" + stage + "'");
  if (c.pipelines.empty()) config_error("pipelines", "no stages selected");

  std::set<std::string> seen;
  for (const auto& d : c.datasets) {
    if (!seen.insert(d.path).second) config_error("datasets", "duplicate dataset '" + d.path + "'");
    const fs::path p = c.resolve(d.path);
    if (!fs::exists(p)) {
      out.push_back({p.string(), "", -1, Severity::error, "file not found"});
      continue;
    }
    switch (d.role) {
      case DatasetRole::decay: io::check_decay_trace(p, out); break;
      case DatasetRole::spectrum: io::check_csv(p, {"freq_hz", "amp"}, out); break;
      case DatasetRole::two_tone: io::check_csv(p, {"voltage_v", "freq_hz", "phase_rad"}, out); break;
      case DatasetRole::series: {
        io::Table t;
        if (io::check_csv(p, {"t_s", "freq_hz"}, out, &t)) {
          try {
            noisespec::FrequencySeries{t.numbers("t_s"), t.numbers("freq_hz")}.validate();
          } catch (const InputError& e) {
            out.push_back({p.string(), "t_s", -1, Severity::error, e.what()});
          }
        }
        break;
      }
    }
  }

  const auto& q = c.qubit;
  const bool needs_fq = c.runs("psd") || c.runs("thermal") || c.runs("spectroscopy");
  if (needs_fq && !(q.f_ss > 0.0)) config_error("qubit.f_ss_hz", "must be > 0");
  if (!(q.lever_c >= 0.0)) config_error("qubit.lever_c_hz_per_v", "must be >= 0");
  if (!(q.t1 >= 0.0)) config_error("qubit.t1_s", "must be >= 0");
  if (!(q.tau_pi >= 0.0)) config_error("qubit.tau_pi_s", "must be >= 0");
  if (c.runs("thermal")) {
    if (!(q.f_r > 0.0)) config_error("qubit.f_r_hz", "must be > 0 for the thermal stage");
    if (!(q.kappa > 0.0)) config_error("qubit.kappa_over_2pi_hz", "must be > 0 for the thermal stage");
    if (q.t1 == 0.0 && !any_role(c, DatasetRole::decay))
      config_error("qubit.t1_s", "thermal stage needs t1_s or a relaxation trace");
    const auto& g = c.temperatures;
    if (!(g.t_min > 0.0 && g.t_max >= g.t_min && g.steps >= 1))
      config_error("temperatures", "need 0 < min_k <= max_k and steps >= 1");
  }
  if (c.runs("spectroscopy") && any_role(c, DatasetRole::spectrum) &&
      !(q.f_r > 0.0 && q.kappa > 0.0))
    config_error("qubit", "transmission fits need f_r_hz and kappa_over_2pi_hz");
  if (c.runs("drift") && !(c.drift_f_min > 0.0 && c.drift_f_max > c.drift_f_min))
    config_error("drift_band_hz", "need 0 < low < high");
  if (!c.reference_table.empty() && !fs::exists(reference_path(c)))
    out.push_back({reference_path(c).string(), "", -1, Severity::error, "reference table not found"});
  return out;
}

std::optional<double> ReportBundle::t1() const {
  for (const auto& t : traces)
    if (t.kind == TraceKind::relaxation && t.fit.t1) return t.fit.t1;
  return std::nullopt;
}

std::optional<double> ReportBundle::t2_star() const {
  for (const auto& t : traces)
    if (t.kind == TraceKind::ramsey) return t.fit.t2;
  return std::nullopt;
}

std::optional<double> ReportBundle::t2_echo() const {
  for (const auto& t : traces)
    if (t.kind == TraceKind::echo) return t.fit.t2;
  return std::nullopt;
}

namespace {

struct Loaded {
  std::string key;
  io::LoadedTrace data;
};

std::string bias_label(double bias_mv) { return "bias " + io::format_number(bias_mv) + " mV"; }

// Fits every trace of the given kinds concurrently; failures become warnings.
void fit_traces(const std::vector<Loaded>& traces, const std::vector<TraceKind>& kinds,
                const std::function<double(const Loaded&)>& t1_for,
                std::vector<std::optional<TraceReport>>& out, Section& section) {
  std::vector<std::string> errors(traces.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(traces.size()); ++i) {
    const auto& l = traces[static_cast<std::size_t>(i)];
    if (std::find(kinds.begin(), kinds.end(), l.data.trace.kind) == kinds.end()) continue;
    try {
      TraceReport r{l.key, l.data.meta.kind, l.data.meta.n_pulses, l.data.meta.bias_mv,
                    l.data.meta.temperature_mk, {}};
      switch (l.data.trace.kind) {
        case TraceKind::relaxation: r.fit = decayfit::fit_relaxation(l.data.trace); break;
        case TraceKind::ramsey: r.fit = decayfit::fit_ramsey(l.data.trace); break;
        case TraceKind::echo:
        case TraceKind::cpmg: r.fit = decayfit::fit_cpmg(l.data.trace, t1_for(l)); break;
      }
      out[static_cast<std::size_t>(i)] = std::move(r);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < traces.size(); ++i)
    if (!errors[i].empty()) section.warnings.push_back(traces[i].key + ": fit failed: " + errors[i]);
}

}  // namespace

ReportBundle run_pipeline(const AnalysisConfig& config) {
  const auto diags = validate_inputs(config);
  if (has_errors(diags)) {
    const auto first = std::find_if(diags.begin(), diags.end(),
                                    [](const auto& d) { return d.severity == io::Severity::error; });
    const auto n = std::count_if(diags.begin(), diags.end(),
                                 [](const auto& d) { return d.severity == io::Severity::error; });
    throw InputError(first->describe() +
                     (n > 1 ? " (+" + std::to_string(n - 1) + " more; run 'validate')" : ""));
  }

  ReportBundle r;
  r.qubit = config.qubit.name;
  r.provenance.tool_version = QNL_VERSION;
  r.provenance.generated_at = utc_now();
  r.provenance.config = config_to_json(config);
  r.provenance.seed = config.seed;
  for (const auto& d : config.datasets) r.provenance.inputs[d.path] = io::sha256_file(config.resolve(d.path));

  const auto& q = config.qubit;
  const spectro::QubitDispersion disp{q.f_ss, q.lever_c, q.v_ss};

  // Decay traces.
  std::vector<Loaded> traces;
  for (const auto& d : config.datasets)
    if (d.role == DatasetRole::decay) traces.push_back({d.path, io::read_decay_trace(config.resolve(d.path))});

  const bool want_traces = config.runs("decay") || config.runs("psd") || config.runs("scaling") ||
                           (config.runs("thermal") && q.t1 == 0.0);
  std::vector<std::string> relaxation_keys, dephasing_keys, all_trace_keys;
  for (const auto& l : traces) {
    all_trace_keys.push_back(l.key);
    if (l.data.trace.kind == TraceKind::relaxation) relaxation_keys.push_back(l.key);
    if (l.data.trace.kind == TraceKind::echo || l.data.trace.kind == TraceKind::cpmg)
      dephasing_keys.push_back(l.key);
  }

  Section trace_section{all_trace_keys, {}};
  std::vector<std::optional<TraceReport>> fitted(traces.size());
  if (want_traces) {
    fit_traces(traces, {TraceKind::relaxation, TraceKind::ramsey}, {}, fitted, trace_section);
    // T1 for the dephasing fits: configured, else the relaxation fit nearest in temperature.
    auto t1_for = [&](const Loaded& l) {
      if (q.t1 > 0.0) return q.t1;
      double best = std::numeric_limits<double>::infinity();
      double best_dt = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < traces.size(); ++i) {
        if (!fitted[i] || fitted[i]->kind != TraceKind::relaxation || !fitted[i]->fit.t1) continue;
        const double dt = std::abs(fitted[i]->temperature_mk - l.data.meta.temperature_mk);
        if (dt < best_dt) best_dt = dt, best = *fitted[i]->fit.t1;
      }
      return best;
    };
    fit_traces(traces, {TraceKind::echo, TraceKind::cpmg}, t1_for, fitted, trace_section);
    if (q.t1 == 0.0 && relaxation_keys.empty() && !dephasing_keys.empty())
      trace_section.warnings.push_back("no T1 available; dephasing fits assume T1 = infinity");
    for (auto& f : fitted)
      if (f) r.traces.push_back(std::move(*f));
  }
  if (config.runs("decay")) r.sections["traces"] = trace_section;

  std::vector<std::string> dephasing_sources = dephasing_keys;
  if (q.t1 == 0.0)
    dephasing_sources.insert(dephasing_sources.end(), relaxation_keys.begin(), relaxation_keys.end());

  // PSD reconstruction and power-law fits.
  if (config.runs("psd")) {
    Section s{dephasing_sources, {}};
    bool sweet_spot_warned = false;
    for (const auto& t : r.traces) {
      if ((t.kind != TraceKind::echo && t.kind != TraceKind::cpmg) || !t.fit.t_phi) continue;
      const auto point = noisespec::reconstruct_psd_point(*t.fit.t_phi, {t.n_pulses, 1.0, q.tau_pi});
      PsdRow row{t.source, t.n_pulses, t.bias_mv, *t.fit.t_phi, point.freq, point.value, {}, {}};
      const double lever = std::abs(spectro::lever_arm(disp, t.bias_mv * 1e-3 - q.v_ss));
      if (lever > 0.0) {
        row.lever = lever;
        row.s_v = noisespec::to_voltage_noise(point, lever).value;
      } else if (!sweet_spot_warned) {
        s.warnings.push_back("points at the sweet spot have no voltage-noise equivalent");
        sweet_spot_warned = true;
      }
      r.psd.push_back(std::move(row));
    }
    std::sort(r.psd.begin(), r.psd.end(), [](const PsdRow& a, const PsdRow& b) {
      return std::tie(a.bias_mv, a.n_pulses, a.source) < std::tie(b.bias_mv, b.n_pulses, b.source);
    });
    r.sections["psd"] = s;

    Section ps{dephasing_sources, {}};
    auto try_fit = [&](const std::string& label, const std::vector<noisespec::PSDPoint>& pts) {
      try {
        r.powerlaw.push_back({label, noisespec::powerlaw_fit(pts)});
      } catch (const FitError& e) {
        ps.warnings.push_back(label + ": " + e.what());
      }
    };
    std::vector<noisespec::PSDPoint> pooled;
    std::map<double, std::vector<noisespec::PSDPoint>> by_bias;
    // The pooled fit uses points away from the sweet spot when there are any.
    const bool any_biased =
        std::any_of(r.psd.begin(), r.psd.end(), [](const PsdRow& p) { return p.lever.has_value(); });
    for (const auto& row : r.psd) {
      if (!any_biased || row.lever) pooled.push_back({row.freq, row.s_f});
      by_bias[row.bias_mv].push_back({row.freq, row.s_f});
    }
    if (pooled.size() >= 3) try_fit("all", pooled);
    for (const auto& [bias, pts] : by_bias)
      if (pts.size() >= 3 && by_bias.size() > 1) try_fit(bias_label(bias), pts);
    r.sections["powerlaw"] = ps;
  }

  // T_phi ~ N^beta per bias point.
  if (config.runs("scaling")) {
    Section s{dephasing_sources, {}};
    std::map<double, std::vector<decayfit::ScalingPoint>> by_bias;
    for (const auto& t : r.traces)
      if ((t.kind == TraceKind::echo || t.kind == TraceKind::cpmg) && t.fit.t_phi)
        by_bias[t.bias_mv].push_back({t.n_pulses, *t.fit.t_phi});
    for (const auto& [bias, pts] : by_bias) {
      std::set<int> ns;
      for (const auto& p : pts) ns.insert(p.n_pulses);
      if (ns.size() < 3) continue;
      try {
        r.scaling.push_back({bias, decayfit::fit_scaling(pts)});
      } catch (const decayfit::ScalingError& e) {
        s.warnings.push_back(bias_label(bias) + ": " + e.what());
      } catch (const FitError& e) {
        s.warnings.push_back(bias_label(bias) + ": " + e.what());
      }
    }
    if (!r.scaling.empty()) {
      decayfit::ScalingFit avg;
      const double k = static_cast<double>(r.scaling.size());
      for (const auto& f : r.scaling) {
        avg.beta += f.fit.beta / k;
        avg.prefactor += f.fit.prefactor / k;
      }
      if (r.scaling.size() > 1) {
        double var = 0.0;
        for (const auto& f : r.scaling) var += (f.fit.beta - avg.beta) * (f.fit.beta - avg.beta);
        avg.beta_err = std::sqrt(var / (k - 1.0) / k);
      } else {
        avg.beta_err = r.scaling.front().fit.beta_err;
      }
      avg.alpha = decayfit::alpha_from_beta(avg.beta);
      avg.alpha_err = avg.beta_err / ((1.0 - avg.beta) * (1.0 - avg.beta));
      r.scaling_average = avg;
    } else if (by_bias.size() > 0) {
      s.warnings.push_back("no bias point has three or more distinct pulse counts");
    }
    r.sections["scaling"] = s;
  }

  // Temperature curves.
  if (config.runs("thermal")) {
    Section s{q.t1 > 0.0 ? std::vector<std::string>{} : relaxation_keys, {}};
    double t1_zero = q.t1;
    if (t1_zero == 0.0) {
      const TraceReport* coldest = nullptr;
      for (const auto& t : r.traces)
        if (t.kind == TraceKind::relaxation && t.fit.t1 &&
            (!coldest || t.temperature_mk < coldest->temperature_mk))
          coldest = &t;
      if (!coldest) throw FitError("thermal stage: no relaxation fit available for T1(0)");
      t1_zero = *coldest->fit.t1;
    }
    const thermal::ThermalModel m{q.f_ss, q.f_r, q.kappa, q.chi, t1_zero};
    m.validate();
    const auto& g = config.temperatures;
    for (int i = 0; i < g.steps; ++i) {
      const double T = g.steps == 1 ? g.t_min : g.t_min + (g.t_max - g.t_min) * i / (g.steps - 1);
      const double n_th = thermal::photon_occupation(q.f_r, T);
      r.thermal.push_back({T, thermal::t1_vs_temperature(m, T), thermal::thermal_population(q.f_ss, T),
                           n_th, thermal::resonator_dephasing(m, n_th)});
    }
    r.sections["thermal"] = s;
  }

  // Spectroscopy.
  if (config.runs("spectroscopy")) {
    Section s;
    for (const auto& d : config.datasets) {
      const auto path = config.resolve(d.path);
      try {
        if (d.role == DatasetRole::two_tone) {
          s.sources.push_back(d.path);
          r.spectroscopy.dispersion = spectro::fit_dispersion(io::extract_qubit_line(io::read_two_tone(path)));
        } else if (d.role == DatasetRole::spectrum) {
          s.sources.push_back(d.path);
          r.spectroscopy.transmission = spectro::fit_transmission(io::read_spectrum(path), {q.f_r, q.kappa});
        }
      } catch (const FitError& e) {
        s.warnings.push_back(d.path + ": fit failed: " + e.what());
      }
    }
    const double g = q.g > 0.0 ? q.g : (r.spectroscopy.transmission ? r.spectroscopy.transmission->g : 0.0);
    if (g > 0.0 && q.f_r > 0.0 && q.kappa > 0.0 && q.f_r != q.f_ss) {
      const double gamma = r.spectroscopy.transmission ? r.spectroscopy.transmission->gamma : 0.0;
      r.spectroscopy.purcell_rate = spectro::purcell_rate({q.f_r, q.kappa, q.f_ss, gamma, g});
    }
    r.sections["spectroscopy"] = s;
  }

  // Slow drift.
  if (config.runs("drift")) {
    Section s;
    for (const auto& d : config.datasets) {
      if (d.role != DatasetRole::series) continue;
      s.sources.push_back(d.path);
      DriftReport dr{d.path, noisespec::periodogram(io::read_frequency_series(config.resolve(d.path))), {}};
      std::vector<noisespec::PSDPoint> band;
      for (const auto& p : dr.psd)
        if (p.freq >= config.drift_f_min && p.freq <= config.drift_f_max && p.value > 0.0) band.push_back(p);
      try {
        dr.fit = noisespec::powerlaw_fit(band);
      } catch (const FitError& e) {
        s.warnings.push_back(d.path + ": " + e.what());
      }
      r.drift.push_back(std::move(dr));
    }
    r.sections["drift"] = s;
  }

  // Literature voltage-noise comparison, rendered as shipped.
  const auto ref = reference_path(config);
  if (fs::exists(ref)) {
    const auto t = io::read_csv(ref);
    r.reference.push_back(t.columns);
    for (const auto& row : t.cells) r.reference.push_back(row);
    const std::string key = config.reference_table.empty() ? "reference:charge_noise_table.csv"
                                                           : config.reference_table;
    r.provenance.inputs[key] = io::sha256_file(ref);
    r.sections["reference"] = {{key}, {}};
  }
  return r;
}

namespace {

json trace_json(const TraceReport& t) {
  return {{"source", t.source},
          {"kind", decayfit::to_string(t.kind)},
          {"n_pulses", t.n_pulses},
          {"bias_mv", num(t.bias_mv)},
          {"temperature_mk", num(t.temperature_mk)},
          {"fit", fit_json(t.fit)}};
}

json dispersion_json(const spectro::DispersionFit& d) {
  return {{"f_ss", num(d.params.f_ss)},
          {"lever_c", num(d.params.lever_c)},
          {"v_ss", num(d.params.v_ss)},
          {"f_ss_err", num(d.f_ss_err)},
          {"lever_c_err", num(d.lever_c_err)},
          {"v_ss_err", num(d.v_ss_err)},
          {"residual_norm", num(d.residual_norm)},
          {"initial_residual_norm", num(d.initial_residual_norm)},
          {"rms_residual", num(d.rms_residual)}};
}

spectro::DispersionFit dispersion_from(const json& j) {
  spectro::DispersionFit d;
  d.params = {as_num(j.at("f_ss")), as_num(j.at("lever_c")), as_num(j.at("v_ss"))};
  d.f_ss_err = as_num(j.at("f_ss_err"));
  d.lever_c_err = as_num(j.at("lever_c_err"));
  d.v_ss_err = as_num(j.at("v_ss_err"));
  d.residual_norm = as_num(j.at("residual_norm"));
  d.initial_residual_norm = as_num(j.at("initial_residual_norm"));
  d.rms_residual = as_num(j.at("rms_residual"));
  return d;
}

json transmission_json(const spectro::TransmissionFit& t) {
  return {{"g", num(t.g)},
          {"gamma", num(t.gamma)},
          {"f_q", num(t.f_q)},
          {"g_err", num(t.g_err)},
          {"gamma_err", num(t.gamma_err)},
          {"f_q_err", num(t.f_q_err)},
          {"residual_norm", num(t.residual_norm)},
          {"initial_residual_norm", num(t.initial_residual_norm)},
          {"resolved", t.resolved},
          {"warnings", t.warnings}};
}

spectro::TransmissionFit transmission_from(const json& j) {
  spectro::TransmissionFit t;
  t.g = as_num(j.at("g"));
  t.gamma = as_num(j.at("gamma"));
  t.f_q = as_num(j.at("f_q"));
  t.g_err = as_num(j.at("g_err"));
  t.gamma_err = as_num(j.at("gamma_err"));
  t.f_q_err = as_num(j.at("f_q_err"));
  t.residual_norm = as_num(j.at("residual_norm"));
  t.initial_residual_norm = as_num(j.at("initial_residual_norm"));
  t.resolved = j.at("resolved").get<bool>();
  t.warnings = j.at("warnings").get<std::vector<std::string>>();
  return t;
}

json to_json(const ReportBundle& r) {
  json traces = json::array();
  for (const auto& t : r.traces) traces.push_back(trace_json(t));

  json psd = json::array();
  for (const auto& p : r.psd)
    psd.push_back({{"source", p.source},
                   {"n_pulses", p.n_pulses},
                   {"bias_mv", num(p.bias_mv)},
                   {"t_phi", num(p.t_phi)},
                   {"freq", num(p.freq)},
                   {"s_f", num(p.s_f)},
                   {"lever", opt(p.lever)},
                   {"s_v", opt(p.s_v)}});

  json powerlaw = json::array();
  for (const auto& p : r.powerlaw) powerlaw.push_back({{"label", p.label}, {"fit", powerlaw_json(p.fit)}});

  json scaling = json::array();
  for (const auto& s : r.scaling) scaling.push_back({{"bias_mv", num(s.bias_mv)}, {"fit", scaling_json(s.fit)}});

  json thermal_rows = json::array();
  for (const auto& t : r.thermal)
    thermal_rows.push_back({{"temperature", num(t.temperature)},
                            {"t1", num(t.t1)},
                            {"p_e", num(t.p_e)},
                            {"n_th", num(t.n_th)},
                            {"gamma_phi", num(t.gamma_phi)}});

  json spec = {{"dispersion", r.spectroscopy.dispersion ? dispersion_json(*r.spectroscopy.dispersion) : json(nullptr)},
               {"transmission",
                r.spectroscopy.transmission ? transmission_json(*r.spectroscopy.transmission) : json(nullptr)},
               {"purcell_rate", opt(r.spectroscopy.purcell_rate)}};

  json drift = json::array();
  for (const auto& d : r.drift) {
    json pts = json::array();
    for (const auto& p : d.psd) pts.push_back(psd_point_json(p));
    drift.push_back({{"source", d.source}, {"psd", pts}, {"fit", d.fit ? powerlaw_json(*d.fit) : json(nullptr)}});
  }

  json sections = json::object();
  for (const auto& [name, s] : r.sections) sections[name] = {{"sources", s.sources}, {"warnings", s.warnings}};

  json summary = {{"t1", opt(r.t1())},
                  {"t2_star", opt(r.t2_star())},
                  {"t2_echo", opt(r.t2_echo())},
                  {"beta", r.scaling_average ? num(r.scaling_average->beta) : json(nullptr)},
                  {"alpha", r.scaling_average ? num(r.scaling_average->alpha) : json(nullptr)}};

  return {{"qubit", r.qubit},
          {"summary", summary},
          {"traces", traces},
          {"psd", psd},
          {"powerlaw", powerlaw},
          {"scaling", scaling},
          {"scaling_average", r.scaling_average ? scaling_json(*r.scaling_average) : json(nullptr)},
          {"thermal", thermal_rows},
          {"spectroscopy", spec},
          {"drift", drift},
          {"reference", r.reference},
          {"sections", sections},
          {"provenance",
           {{"tool_version", r.provenance.tool_version},
            {"generated_at", r.provenance.generated_at},
            {"config", json::parse(r.provenance.config.empty() ? "null" : r.provenance.config)},
            {"seed", r.provenance.seed},
            {"inputs", r.provenance.inputs}}}};
}

}  // namespace

std::string report_to_json(const ReportBundle& r) { return to_json(r).dump(2) + "\n"; }

ReportBundle report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("report: invalid JSON: ") + e.what());
  }
  ReportBundle r;
  try {
    r.qubit = j.at("qubit").get<std::string>();
    for (const auto& t : j.at("traces"))
      r.traces.push_back({t.at("source").get<std::string>(),
                          decayfit::trace_kind_from_string(t.at("kind").get<std::string>()),
                          t.at("n_pulses").get<int>(), as_num(t.at("bias_mv")),
                          as_num(t.at("temperature_mk")), fit_from(t.at("fit"))});
    for (const auto& p : j.at("psd"))
      r.psd.push_back({p.at("source").get<std::string>(), p.at("n_pulses").get<int>(),
                       as_num(p.at("bias_mv")), as_num(p.at("t_phi")), as_num(p.at("freq")),
                       as_num(p.at("s_f")), as_opt(p.at("lever")), as_opt(p.at("s_v"))});
    for (const auto& p : j.at("powerlaw"))
      r.powerlaw.push_back({p.at("label").get<std::string>(), powerlaw_from(p.at("fit"))});
    for (const auto& s : j.at("scaling")) r.scaling.push_back({as_num(s.at("bias_mv")), scaling_from(s.at("fit"))});
    if (!j.at("scaling_average").is_null()) r.scaling_average = scaling_from(j.at("scaling_average"));
    for (const auto& t : j.at("thermal"))
      r.thermal.push_back({as_num(t.at("temperature")), as_num(t.at("t1")), as_num(t.at("p_e")),
                           as_num(t.at("n_th")), as_num(t.at("gamma_phi"))});
    const auto& spec = j.at("spectroscopy");
    if (!spec.at("dispersion").is_null()) r.spectroscopy.dispersion = dispersion_from(spec.at("dispersion"));
    if (!spec.at("transmission").is_null()) r.spectroscopy.transmission = transmission_from(spec.at("transmission"));
    r.spectroscopy.purcell_rate = as_opt(spec.at("purcell_rate"));
    for (const auto& d : j.at("drift")) {
      DriftReport dr{d.at("source").get<std::string>(), {}, {}};
      for (const auto& p : d.at("psd")) dr.psd.push_back(psd_point_from(p));
      if (!d.at("fit").is_null()) dr.fit = powerlaw_from(d.at("fit"));
      r.drift.push_back(std::move(dr));
    }
    r.reference = j.at("reference").get<std::vector<std::vector<std::string>>>();
    for (const auto& [name, s] : j.at("sections").items())
      r.sections[name] = {s.at("sources").get<std::vector<std::string>>(),
                          s.at("warnings").get<std::vector<std::string>>()};
    const auto& p = j.at("provenance");
    r.provenance.tool_version = p.at("tool_version").get<std::string>();
    r.provenance.generated_at = p.at("generated_at").get<std::string>();
    r.provenance.config = p.at("config").is_null() ? std::string{} : p.at("config").dump(2);
    r.provenance.seed = p.at("seed").get<std::uint64_t>();
    r.provenance.inputs = p.at("inputs").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("report: schema violation: ") + e.what());
  }
  return r;
}

std::map<std::string, std::string> render_outputs(const ReportBundle& r) {
  std::map<std::string, std::string> out;
  out["report.json"] = report_to_json(r);

  if (!r.traces.empty()) {
    std::string s = "source,kind,n_pulses,bias_mv,temperature_mk,t1_s,t2_s,t_phi_s,stretch,detuning_hz\n";
    auto o = [](const std::optional<double>& v) { return v ? io::format_number(*v) : std::string{}; };
    for (const auto& t : r.traces)
      s += t.source + "," + decayfit::to_string(t.kind) + "," + std::to_string(t.n_pulses) + "," +
           io::format_number(t.bias_mv) + "," + io::format_number(t.temperature_mk) + "," + o(t.fit.t1) +
           "," + io::format_number(t.fit.t2) + "," + o(t.fit.t_phi) + "," + io::format_number(t.fit.stretch) +
           "," + o(t.fit.detuning) + "\n";
    out["fits.csv"] = s;
  }
  if (!r.psd.empty()) {
    std::vector<noisespec::PSDPoint> pts;
    for (const auto& p : r.psd) pts.push_back({p.freq, p.s_f, noisespec::PsdUnits::freq_noise});
    for (const auto& p : r.psd)
      if (p.s_v) pts.push_back({p.freq, *p.s_v, noisespec::PsdUnits::voltage_noise});
    out["psd.csv"] = io::psd_csv(pts);
  }
  if (!r.scaling.empty()) {
    std::vector<std::vector<double>> rows;
    for (const auto& s : r.scaling)
      rows.push_back({s.bias_mv, s.fit.beta, s.fit.beta_err, s.fit.alpha, s.fit.alpha_err, s.fit.prefactor});
    out["scaling.csv"] = io::csv_text({"bias_mv", "beta", "beta_err", "alpha", "alpha_err", "prefactor_s"}, rows);
  }
  if (!r.thermal.empty()) {
    std::vector<std::vector<double>> rows;
    for (const auto& t : r.thermal) rows.push_back({t.temperature, t.t1, t.p_e, t.n_th, t.gamma_phi});
    out["thermal.csv"] = io::csv_text({"temp_k", "t1_s", "pe", "n_th", "gamma_phi"}, rows);
  }
  for (std::size_t i = 0; i < r.drift.size(); ++i)
    out[r.drift.size() == 1 ? "drift_psd.csv" : "drift_psd_" + std::to_string(i) + ".csv"] =
        io::psd_csv(r.drift[i].psd);
  if (!r.reference.empty()) {
    std::string s;
    for (const auto& row : r.reference) {
      for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + row[i];
      s += "\n";
    }
    out["reference_charge_noise.csv"] = s;
  }
  return out;
}

std::string fit_to_json(const decayfit::CoherenceFit& f) { return fit_json(f).dump(2) + "\n"; }
std::string fit_to_json(const spectro::DispersionFit& f) { return dispersion_json(f).dump(2) + "\n"; }
std::string fit_to_json(const spectro::TransmissionFit& f) { return transmission_json(f).dump(2) + "\n"; }
std::string fit_to_json(const noisespec::PowerLawFit& f) { return powerlaw_json(f).dump(2) + "\n"; }
std::string fit_to_json(const decayfit::ScalingFit& f) { return scaling_json(f).dump(2) + "\n"; }

void write_report(const ReportBundle& r, const fs::path& dir) {
  const auto files = render_outputs(r);
  for (const auto& [name, content] : files) io::write_atomic(dir / name, content);
}

std::vector<std::string> stale_sections(const ReportBundle& r, const AnalysisConfig& config) {
  std::vector<std::string> out;
  const auto ref = reference_path(config);
  for (const auto& [name, section] : r.sections) {
    for (const auto& key : section.sources) {
      const fs::path p = key == "reference:charge_noise_table.csv" ? ref : config.resolve(key);
      const auto recorded = r.provenance.inputs.find(key);
      if (!fs::exists(p) || recorded == r.provenance.inputs.end() ||
          io::sha256_file(p) != recorded->second) {
        out.push_back(name);
        break;
      }
    }
  }
  return out;
}

}  // namespace qnl::pipeline
