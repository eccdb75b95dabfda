#pragma once

// Analysis configuration, end-to-end pipeline and the JSON report bundle.

#include "qnl/decayfit.hpp"
#include "qnl/io.hpp"
#include "qnl/noisespec.hpp"
#include "qnl/spectro.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qnl::pipeline {

namespace fs = std::filesystem;

enum class DatasetRole { decay, spectrum, two_tone, series };

std::string to_string(DatasetRole r);
DatasetRole dataset_role_from_string(const std::string& s);

struct Dataset {
  std::string path;  // relative paths resolve against AnalysisConfig::base_dir
  DatasetRole role = DatasetRole::decay;
  bool operator==(const Dataset&) const = default;
};

struct QubitMeta {
  std::string name;
  double f_ss = 0.0;     // Hz
  double lever_c = 0.0;  // Hz/V
  double v_ss = 0.0;     // V, voltage origin of the dispersion
  double f_r = 0.0;      // Hz
  double kappa = 0.0;    // rad/s
  double chi = 0.0;      // rad/s
  double t1 = 0.0;       // s; 0 means take it from a relaxation trace
  double g = 0.0;        // rad/s; 0 means take it from a transmission fit
  double tau_pi = 0.0;   // s
  bool operator==(const QubitMeta&) const = default;
};

struct TemperatureGrid {
  double t_min = 0.01;  // K
  double t_max = 0.5;   // K
  int steps = 50;
  bool operator==(const TemperatureGrid&) const = default;
};

inline const std::vector<std::string> kAllStages = {"decay",   "psd",          "scaling",
                                                    "thermal", "spectroscopy", "drift"};

struct AnalysisConfig {
  std::vector<Dataset> datasets;
  QubitMeta qubit;
  std::vector<std::string> pipelines = kAllStages;
  std::string output_dir = "report";
  std::uint64_t seed = 0;
  TemperatureGrid temperatures;
  double drift_f_min = 1e-3;  // Hz, band for the drift power-law fit
  double drift_f_max = 1e-1;
  std::string reference_table;  // empty: the bundled table
  fs::path base_dir;            // not serialized

  bool runs(const std::string& stage) const;
  fs::path resolve(const std::string& p) const;
};

/// Parses a config. Relative paths are resolved against `base_dir`.
AnalysisConfig config_from_json(const std::string& text, const fs::path& base_dir);
std::string config_to_json(const AnalysisConfig& c);

/// Reads a config file; QNL_SEED, when set, overrides the seed.
AnalysisConfig load_config(const fs::path& path);

/// Every violation found; empty iff run_pipeline's preconditions hold.
/// Warnings (severity warning) do not block a run.
std::vector<io::Diagnostic> validate_inputs(const AnalysisConfig& config);
bool has_errors(const std::vector<io::Diagnostic>& diags);

struct TraceReport {
  std::string source;
  decayfit::TraceKind kind = decayfit::TraceKind::relaxation;
  int n_pulses = 0;
  double bias_mv = 0.0;
  double temperature_mk = 0.0;
  decayfit::CoherenceFit fit;
  bool operator==(const TraceReport&) const = default;
};

struct PsdRow {
  std::string source;
  int n_pulses = 0;
  double bias_mv = 0.0;
  double t_phi = 0.0;  // s
  double freq = 0.0;   // Hz
  double s_f = 0.0;    // Hz^2/Hz
  std::optional<double> lever;  // Hz/V at the bias point
  std::optional<double> s_v;    // uV^2/Hz
  bool operator==(const PsdRow&) const = default;
};

struct PowerLawReport {
  std::string label;  // "all" or "bias <mV>"
  noisespec::PowerLawFit fit;
  bool operator==(const PowerLawReport&) const = default;
};

struct ScalingReport {
  double bias_mv = 0.0;
  decayfit::ScalingFit fit;
  bool operator==(const ScalingReport&) const = default;
};

struct ThermalRow {
  double temperature = 0.0;  // K
  double t1 = 0.0;           // s
  double p_e = 0.0;
  double n_th = 0.0;
  double gamma_phi = 0.0;  // 1/s
  bool operator==(const ThermalRow&) const = default;
};

struct SpectroscopyReport {
  std::optional<spectro::DispersionFit> dispersion;
  std::optional<spectro::TransmissionFit> transmission;
  std::optional<double> purcell_rate;  // 1/s
  bool operator==(const SpectroscopyReport&) const = default;
};

struct DriftReport {
  std::string source;
  std::vector<noisespec::PSDPoint> psd;
  std::optional<noisespec::PowerLawFit> fit;
  bool operator==(const DriftReport&) const = default;
};

struct Section {
  std::vector<std::string> sources;  // dataset keys feeding this section
  std::vector<std::string> warnings;
  bool operator==(const Section&) const = default;
};

struct Provenance {
  std::string tool_version;
  std::string generated_at;  // the only non-deterministic field
  std::string config;        // canonical config JSON
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;  // dataset key -> sha256
  bool operator==(const Provenance&) const = default;
};

struct ReportBundle {
  std::string qubit;
  std::vector<TraceReport> traces;
  std::vector<PsdRow> psd;
  std::vector<PowerLawReport> powerlaw;
  std::vector<ScalingReport> scaling;
  std::optional<decayfit::ScalingFit> scaling_average;
  std::vector<ThermalRow> thermal;
  SpectroscopyReport spectroscopy;
  std::vector<DriftReport> drift;
  std::vector<std::vector<std::string>> reference;  // header row first
  std::map<std::string, Section> sections;
  Provenance provenance;
  bool operator==(const ReportBundle&) const = default;

  /// Headline numbers, absent when no trace of that kind was analysed.
  std::optional<double> t1() const;
  std::optional<double> t2_star() const;
  std::optional<double> t2_echo() const;
};

/// Runs the selected stages. Throws InputError (naming file and column) if
/// validation fails; writes nothing.
ReportBundle run_pipeline(const AnalysisConfig& config);

std::string report_to_json(const ReportBundle& r);
ReportBundle report_from_json(const std::string& text);

/// Files written by write_report, keyed by file name.
std::map<std::string, std::string> render_outputs(const ReportBundle& r);

/// Writes report.json and the CSV tables atomically into `dir`.
void write_report(const ReportBundle& r, const fs::path& dir);

/// JSON records for single fits, with field names as in the structs.
std::string fit_to_json(const decayfit::CoherenceFit& f);
std::string fit_to_json(const spectro::DispersionFit& f);
std::string fit_to_json(const spectro::TransmissionFit& f);
std::string fit_to_json(const noisespec::PowerLawFit& f);
std::string fit_to_json(const decayfit::ScalingFit& f);

/// Sections whose recorded inputs are missing or changed on disk.
std::vector<std::string> stale_sections(const ReportBundle& r, const AnalysisConfig& config);

}  // namespace qnl::pipeline
