#pragma once

// CSV and sidecar ingestion, table emission, atomic writes and content hashes.

#include "qnl/decayfit.hpp"
#include "qnl/noisespec.hpp"
#include "qnl/spectro.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace qnl::io {

namespace fs = std::filesystem;

enum class Severity { error, warning };

struct Diagnostic {
  std::string file;
  std::string column;  // empty when the issue is not tied to a column
  long row = -1;       // 1-based data row, -1 when not tied to a row
  Severity severity = Severity::error;
  std::string message;

  std::string describe() const;
};

/// A parsed CSV file: header plus raw cells. Rows are data rows only.
struct Table {
  std::string source;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> cells;

  std::size_t rows() const { return cells.size(); }
  /// Index of `name`; throws InputError naming file and column if absent.
  std::size_t column(const std::string& name) const;
  /// Numeric cell; throws InputError naming file, column and row on failure.
  double number(std::size_t row, const std::string& name) const;
  std::vector<double> numbers(const std::string& name) const;
};

/// Reads a comma-separated file with a header line. Blank lines and lines
/// starting with '#' are skipped. Throws InputError if the file cannot be read,
/// a row has the wrong number of fields, or a required column is missing.
Table read_csv(const fs::path& path, const std::vector<std::string>& required = {});

/// Non-throwing check of a CSV file: every problem is appended to `out`.
/// Returns the table when it could be parsed at all.
bool check_csv(const fs::path& path, const std::vector<std::string>& numeric_columns,
               std::vector<Diagnostic>& out, Table* table = nullptr);

struct TraceMetadata {
  decayfit::TraceKind kind = decayfit::TraceKind::relaxation;
  int n_pulses = 0;
  double bias_mv = 0.0;
  double temperature_mk = 0.0;
};

/// `<stem>.json` next to a trace CSV.
fs::path sidecar_path(const fs::path& trace_csv);

TraceMetadata read_sidecar(const fs::path& path);
std::string sidecar_json(const TraceMetadata& meta);

struct LoadedTrace {
  decayfit::DecayTrace trace;
  TraceMetadata meta;
};

/// `tau_s,pe` plus its sidecar.
LoadedTrace read_decay_trace(const fs::path& csv);

/// Full diagnostic pass over a trace and its sidecar.
void check_decay_trace(const fs::path& csv, std::vector<Diagnostic>& out);

std::vector<spectro::SpectrumPoint> read_spectrum(const fs::path& path);

struct TwoTonePoint {
  double voltage = 0.0;  // V
  double freq = 0.0;     // Hz
  double phase = 0.0;    // rad
};

std::vector<TwoTonePoint> read_two_tone(const fs::path& path);

/// Qubit line of a two-tone map: per voltage, the frequency whose phase
/// departs most from that column's median.
std::vector<spectro::VoltagePoint> extract_qubit_line(const std::vector<TwoTonePoint>& map);

noisespec::FrequencySeries read_frequency_series(const fs::path& path);
std::vector<noisespec::PSDPoint> read_psd(const fs::path& path);

/// Shortest decimal form that round-trips.
std::string format_number(double v);

std::string csv_text(const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows);
std::string trace_csv(const decayfit::DecayTrace& trace);
std::string psd_csv(const std::vector<noisespec::PSDPoint>& points);

/// Writes via a temporary file in the same directory followed by a rename.
void write_atomic(const fs::path& path, const std::string& content);

std::string read_text(const fs::path& path);

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

}  // namespace qnl::io
