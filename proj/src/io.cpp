#include "qnl/io.hpp"

#include "qnl/error.hpp"

#include "json.hpp"
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <system_error>

namespace qnl::io {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string where(const std::string& file, const std::string& column, long row) {
  std::string s = file;
  if (!column.empty()) s += ", column '" + column + "'";
  if (row >= 0) s += ", row " + std::to_string(row);
  return s;
}

// Parses without throwing on content problems; returns false if the file is
// unreadable or structurally broken (no header, ragged rows).
bool parse_table(const fs::path& path, Table& t, std::vector<Diagnostic>& diags) {
  t = Table{};
  t.source = path.string();
  std::ifstream in(path);
  if (!in) {
    diags.push_back({t.source, "", -1, Severity::error, "cannot open file"});
    return false;
  }
  std::string line;
  bool have_header = false;
  bool ok = true;
  long row = 0;
  while (std::getline(in, line)) {
    const auto stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    auto fields = split(stripped);
    if (!have_header) {
      t.columns = std::move(fields);
      have_header = true;
      continue;
    }
    ++row;
    if (fields.size() != t.columns.size()) {
      diags.push_back({t.source, "", row, Severity::error,
                       "expected " + std::to_string(t.columns.size()) + " fields, found " +
                           std::to_string(fields.size())});
      ok = false;
      continue;
    }
    t.cells.push_back(std::move(fields));
  }
  if (!have_header) {
    diags.push_back({t.source, "", -1, Severity::error, "missing header line"});
    return false;
  }
  return ok;
}

void require_columns(const Table& t, const std::vector<std::string>& required,
                     std::vector<Diagnostic>& diags) {
  for (const auto& c : required)
    if (std::find(t.columns.begin(), t.columns.end(), c) == t.columns.end())
      diags.push_back({t.source, c, -1, Severity::error, "missing column"});
}

[[noreturn]] void raise(const std::vector<Diagnostic>& diags) {
  throw InputError(diags.front().describe());
}

}  // namespace

std::string Diagnostic::describe() const {
  return std::string(severity == Severity::error ? "error" : "warning") + ": " +
         where(file, column, row) + ": " + message;
}

std::size_t Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw InputError(where(source, name, -1) + ": missing column");
  return static_cast<std::size_t>(it - columns.begin());
}

double Table::number(std::size_t row, const std::string& name) const {
  const auto& cell = cells.at(row)[column(name)];
  double v = 0.0;
  if (!parse_double(cell, v) || !std::isfinite(v))
    throw InputError(where(source, name, static_cast<long>(row) + 1) + ": not a finite number '" +
                     cell + "'");
  return v;
}

std::vector<double> Table::numbers(const std::string& name) const {
  std::vector<double> out(rows());
  for (std::size_t i = 0; i < rows(); ++i) out[i] = number(i, name);
  return out;
}

Table read_csv(const fs::path& path, const std::vector<std::string>& required) {
  Table t;
  std::vector<Diagnostic> diags;
  parse_table(path, t, diags);
  require_columns(t, required, diags);
  if (!diags.empty()) raise(diags);
  return t;
}

bool check_csv(const fs::path& path, const std::vector<std::string>& numeric_columns,
               std::vector<Diagnostic>& out, Table* table) {
  Table t;
  const auto before = out.size();
  if (!parse_table(path, t, out) && t.columns.empty()) return false;
  require_columns(t, numeric_columns, out);
  for (const auto& name : numeric_columns) {
    const auto it = std::find(t.columns.begin(), t.columns.end(), name);
    if (it == t.columns.end()) continue;
    const auto c = static_cast<std::size_t>(it - t.columns.begin());
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double v = 0.0;
      if (!parse_double(t.cells[r][c], v) || !std::isfinite(v))
        out.push_back({t.source, name, static_cast<long>(r) + 1, Severity::error,
                       "not a finite number '" + t.cells[r][c] + "'"});
    }
  }
  if (t.rows() == 0) out.push_back({t.source, "", -1, Severity::error, "no data rows"});
  if (table) *table = std::move(t);
  for (std::size_t i = before; i < out.size(); ++i)
    if (out[i].severity == Severity::error) return false;
  return true;
}

fs::path sidecar_path(const fs::path& trace_csv) {
  fs::path p = trace_csv;
  return p.replace_extension(".json");
}

namespace {

TraceMetadata parse_sidecar(const fs::path& path, std::vector<Diagnostic>& diags) {
  TraceMetadata m;
  const std::string file = path.string();
  std::ifstream in(path);
  if (!in) {
    diags.push_back({file, "", -1, Severity::error, "cannot open sidecar"});
    return m;
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    diags.push_back({file, "", -1, Severity::error, std::string("invalid JSON: ") + e.what()});
    return m;
  }
  if (!j.is_object()) {
    diags.push_back({file, "", -1, Severity::error, "sidecar must be a JSON object"});
    return m;
  }
  if (!j.contains("kind") || !j["kind"].is_string()) {
    diags.push_back({file, "kind", -1, Severity::error, "missing or non-string field"});
  } else {
    try {
      m.kind = decayfit::trace_kind_from_string(j["kind"].get<std::string>());
    } catch (const Error& e) {
      diags.push_back({file, "kind", -1, Severity::error, e.what()});
    }
  }
  auto number = [&](const char* key, double& dst, bool required) {
    if (!j.contains(key)) {
      if (required) diags.push_back({file, key, -1, Severity::error, "missing field"});
      return;
    }
    if (!j[key].is_number()) {
      diags.push_back({file, key, -1, Severity::error, "field must be numeric"});
      return;
    }
    dst = j[key].get<double>();
  };
  double n = 0.0;
  number("n_pulses", n, false);
  if (n != std::floor(n) || n < 0)
    diags.push_back({file, "n_pulses", -1, Severity::error, "must be a non-negative integer"});
  m.n_pulses = static_cast<int>(n);
  if (m.kind == decayfit::TraceKind::echo && !j.contains("n_pulses")) m.n_pulses = 1;
  if (m.kind == decayfit::TraceKind::cpmg && m.n_pulses < 1)
    diags.push_back({file, "n_pulses", -1, Severity::error, "cpmg traces need n_pulses >= 1"});
  number("bias_mv", m.bias_mv, false);
  number("temperature_mk", m.temperature_mk, false);
  return m;
}

}  // namespace

TraceMetadata read_sidecar(const fs::path& path) {
  std::vector<Diagnostic> diags;
  auto m = parse_sidecar(path, diags);
  if (!diags.empty()) raise(diags);
  return m;
}

std::string sidecar_json(const TraceMetadata& meta) {
  json j = {{"kind", decayfit::to_string(meta.kind)},
            {"n_pulses", meta.n_pulses},
            {"bias_mv", meta.bias_mv},
            {"temperature_mk", meta.temperature_mk}};
  return j.dump(2) + "\n";
}

LoadedTrace read_decay_trace(const fs::path& csv) {
  const Table t = read_csv(csv, {"tau_s", "pe"});
  LoadedTrace out;
  out.meta = read_sidecar(sidecar_path(csv));
  out.trace.times = t.numbers("tau_s");
  out.trace.populations = t.numbers("pe");
  out.trace.kind = out.meta.kind;
  out.trace.n_pulses = out.meta.n_pulses;
  try {
    out.trace.validate();
  } catch (const InputError& e) {
    throw InputError(csv.string() + ": " + e.what());
  }
  return out;
}

void check_decay_trace(const fs::path& csv, std::vector<Diagnostic>& out) {
  Table t;
  const bool parsed = check_csv(csv, {"tau_s", "pe"}, out, &t);
  const auto side = sidecar_path(csv);
  if (!fs::exists(side))
    out.push_back({side.string(), "", -1, Severity::error, "missing metadata sidecar"});
  else
    parse_sidecar(side, out);
  if (!parsed) return;

  const auto times = t.numbers("tau_s");
  const auto pe = t.numbers("pe");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      out.push_back({t.source, "tau_s", static_cast<long>(i) + 1, Severity::error,
                     "times not strictly increasing"});
  for (std::size_t i = 0; i < pe.size(); ++i)
    if (pe[i] < -0.1 || pe[i] > 1.1)
      out.push_back({t.source, "pe", static_cast<long>(i) + 1, Severity::warning,
                     "population " + format_number(pe[i]) + " outside [-0.1, 1.1]"});
}

std::vector<spectro::SpectrumPoint> read_spectrum(const fs::path& path) {
  const Table t = read_csv(path, {"freq_hz", "amp"});
  std::vector<spectro::SpectrumPoint> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) out[i] = {t.number(i, "freq_hz"), t.number(i, "amp")};
  return out;
}

std::vector<TwoTonePoint> read_two_tone(const fs::path& path) {
  const Table t = read_csv(path, {"voltage_v", "freq_hz", "phase_rad"});
  std::vector<TwoTonePoint> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i)
    out[i] = {t.number(i, "voltage_v"), t.number(i, "freq_hz"), t.number(i, "phase_rad")};
  return out;
}

std::vector<spectro::VoltagePoint> extract_qubit_line(const std::vector<TwoTonePoint>& map) {
  std::map<double, std::vector<const TwoTonePoint*>> columns;
  for (const auto& p : map) columns[p.voltage].push_back(&p);
  std::vector<spectro::VoltagePoint> out;
  for (const auto& [v, col] : columns) {
    std::vector<double> phases;
    for (const auto* p : col) phases.push_back(p->phase);
    std::nth_element(phases.begin(), phases.begin() + phases.size() / 2, phases.end());
    const double median = phases[phases.size() / 2];
    const auto* best = *std::max_element(col.begin(), col.end(), [&](auto* a, auto* b) {
      return std::abs(a->phase - median) < std::abs(b->phase - median);
    });
    out.push_back({v, best->freq});
  }
  return out;
}

noisespec::FrequencySeries read_frequency_series(const fs::path& path) {
  const Table t = read_csv(path, {"t_s", "freq_hz"});
  noisespec::FrequencySeries s{t.numbers("t_s"), t.numbers("freq_hz")};
  try {
    s.validate();
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return s;
}

std::vector<noisespec::PSDPoint> read_psd(const fs::path& path) {
  const Table t = read_csv(path, {"freq_hz", "psd", "units"});
  const auto uc = t.column("units");
  std::vector<noisespec::PSDPoint> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    out[i].freq = t.number(i, "freq_hz");
    out[i].value = t.number(i, "psd");
    try {
      out[i].units = noisespec::psd_units_from_string(t.cells[i][uc]);
    } catch (const InputError& e) {
      throw InputError(where(t.source, "units", static_cast<long>(i) + 1) + ": " + e.what());
    }
  }
  return out;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_text(const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
  std::string s;
  for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
  s += '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) s += ',';
      s += format_number(r[i]);
    }
    s += '\n';
  }
  return s;
}

std::string trace_csv(const decayfit::DecayTrace& trace) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < trace.times.size(); ++i)
    rows.push_back({trace.times[i], trace.populations[i]});
  return csv_text({"tau_s", "pe"}, rows);
}

std::string psd_csv(const std::vector<noisespec::PSDPoint>& points) {
  std::string s = "freq_hz,psd,units\n";
  for (const auto& p : points)
    s += format_number(p.freq) + "," + format_number(p.value) + "," + noisespec::to_string(p.units) +
         "\n";
  return s;
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(tmp.string() + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw InputError(tmp.string() + ": write failed");
    }
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw Error("sha256: digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

}  // namespace qnl::io
