#include "doctest.h"

#include "qnl/error.hpp"
#include "qnl/io.hpp"

#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

using namespace qnl;
using namespace qnl::io;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qnl_io_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("read_csv parses headers, skips comments and blank lines") {
  TempDir d;
  const auto p = d.write("a.csv", "# comment\nfreq_hz, amp\n\n1e9,0.5\n 2e9 ,+0.25\n");
  const auto t = read_csv(p, {"freq_hz", "amp"});
  CHECK(t.rows() == 2);
  CHECK(t.number(1, "freq_hz") == 2e9);
  CHECK(t.number(1, "amp") == 0.25);
  CHECK(t.numbers("amp") == std::vector<double>{0.5, 0.25});
}

TEST_CASE("schema errors name the file and the column") {
  TempDir d;
  const auto p = d.write("trace.csv", "tau_s,population\n0,1\n");
  const auto msg = error_of([&] { read_csv(p, {"tau_s", "pe"}); });
  CHECK(contains(msg, p.string()));
  CHECK(contains(msg, "column 'pe'"));

  const auto q = d.write("bad.csv", "tau_s,pe\n0,1\n1e-6,abc\n");
  const auto t = read_csv(q, {"tau_s", "pe"});
  const auto msg2 = error_of([&] { t.numbers("pe"); });
  CHECK(contains(msg2, q.string()));
  CHECK(contains(msg2, "column 'pe'"));
  CHECK(contains(msg2, "row 2"));

  const auto r = d.write("ragged.csv", "tau_s,pe\n0,1\n1,2,3\n");
  CHECK(contains(error_of([&] { read_csv(r); }), "row 2"));
  CHECK(contains(error_of([&] { read_csv(d.path / "missing.csv"); }), "cannot open"));
  const auto s = d.write("psd.csv", "freq_hz,psd,units\n1,2,furlongs\n");
  CHECK(contains(error_of([&] { read_psd(s); }), "column 'units'"));
}

TEST_CASE("decay trace and sidecar round trip") {
  TempDir d;
  decayfit::DecayTrace tr{{0.0, 1.5e-6, 3.25e-6}, {0.95, 0.1234567890123, -0.01}, decayfit::TraceKind::cpmg, 8};
  write_atomic(d.path / "t.csv", trace_csv(tr));
  write_atomic(d.path / "t.json", sidecar_json({decayfit::TraceKind::cpmg, 8, 0.167, 10.0}));
  const auto back = read_decay_trace(d.path / "t.csv");
  CHECK(back.trace.times == tr.times);
  CHECK(back.trace.populations == tr.populations);
  CHECK(back.trace.kind == decayfit::TraceKind::cpmg);
  CHECK(back.meta.n_pulses == 8);
  CHECK(back.meta.bias_mv == 0.167);
  CHECK(back.meta.temperature_mk == 10.0);

  d.write("e.json", R"({"kind": "echo"})");
  CHECK(read_sidecar(d.path / "e.json").n_pulses == 1);
  d.write("c.json", R"({"kind": "cpmg"})");
  CHECK(contains(error_of([&] { read_sidecar(d.path / "c.json"); }), "n_pulses"));
  d.write("k.json", R"({"kind": "spin-lock"})");
  CHECK_THROWS_AS(read_sidecar(d.path / "k.json"), InputError);
}

TEST_CASE("check_decay_trace collects every problem") {
  TempDir d;
  d.write("ok.csv", "tau_s,pe\n0,0.9\n1e-6,0.5\n2e-6,0.3\n");
  d.write("ok.json", R"({"kind": "relaxation", "n_pulses": 0})");
  std::vector<Diagnostic> diags;
  check_decay_trace(d.path / "ok.csv", diags);
  CHECK(diags.empty());

  d.write("nm.csv", "tau_s,pe\n0,0.9\n2e-6,0.5\n1e-6,0.3\n3e-6,0.2\n");
  d.write("nm.json", R"({"kind": "relaxation"})");
  diags.clear();
  check_decay_trace(d.path / "nm.csv", diags);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].row == 3);
  CHECK(diags[0].column == "tau_s");
  CHECK(diags[0].severity == Severity::error);

  d.write("hi.csv", "tau_s,pe\n0,1.5\n1e-6,0.5\n");
  d.write("hi.json", R"({"kind": "relaxation"})");
  diags.clear();
  check_decay_trace(d.path / "hi.csv", diags);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].severity == Severity::warning);
  CHECK(diags[0].row == 1);

  d.write("multi.csv", "tau_s,pe\n0,x\n1e-6,y\n");
  diags.clear();
  check_decay_trace(d.path / "multi.csv", diags);
  CHECK(diags.size() == 3);  // two bad cells and the missing sidecar
}

TEST_CASE("extract_qubit_line picks the phase response per voltage") {
  std::vector<TwoTonePoint> map;
  for (double v : {-1e-3, 0.0, 1e-3})
    for (int k = 0; k < 11; ++k) {
      const double f = 5e9 + k * 1e7;
      const double line = 5e9 + 5e7 + v * 3e10;
      map.push_back({v, f, std::abs(f - line) < 1 ? 0.9 : 0.01});
    }
  const auto pts = extract_qubit_line(map);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].freq == 5e9 + 2e7);
  CHECK(pts[1].freq == 5e9 + 5e7);
  CHECK(pts[2].freq == 5e9 + 8e7);
}

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e12, 1e12);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(csv_text({"a", "b"}, {{1.0, 0.5}}) == "a,b\n1,0.5\n");
}

TEST_CASE("atomic writes and hashes") {
  TempDir d;
  const auto p = d.path / "sub" / "out.txt";
  write_atomic(p, "first");
  write_atomic(p, "abc");
  CHECK(read_text(p) == "abc");
  CHECK_FALSE(fs::exists(d.path / "sub" / "out.txt.tmp"));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_file(p) == sha256_hex("abc"));
}
