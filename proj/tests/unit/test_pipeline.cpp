#include "doctest.h"

#include "qnl/error.hpp"
#include "qnl/fixture.hpp"
#include "qnl/io.hpp"
#include "qnl/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace qnl;
using namespace qnl::pipeline;

namespace {

fs::path scratch(const std::string& tag) {
  auto p = fs::temp_directory_path() /
           ("qnl_pipe_" + std::to_string(::getpid()) + "_" + tag + "_" + std::to_string(std::random_device{}()));
  fs::create_directories(p);
  return p;
}

// One fixture per process; tests that mutate inputs work on copies.
const fs::path& fixture_dir() {
  static const fs::path dir = [] {
    auto d = scratch("fixture");
    fixture::write_q1_fixture(d, 7);
    return d;
  }();
  return dir;
}

fs::path copy_fixture(const std::string& tag) {
  auto d = scratch(tag);
  fs::copy(fixture_dir(), d, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  return d;
}

const ReportBundle& fixture_report() {
  static const ReportBundle r = run_pipeline(load_config(fixture_dir() / "config.json"));
  return r;
}

int run_cli(const std::string& args, std::string* stdout_text = nullptr) {
  const auto out = scratch("cli") / "stdout.txt";
  const std::string cmd = std::string(QNL_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  if (stdout_text) *stdout_text = io::read_text(out);
  fs::remove_all(out.parent_path());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string without_timestamp(const std::string& s) {
  return std::regex_replace(s, std::regex("\"generated_at\": \"[^\"]*\""), "\"generated_at\": \"\"");
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("well-formed fixture validates cleanly") {
  CHECK(validate_inputs(load_config(fixture_dir() / "config.json")).empty());
}

TEST_CASE("fixture report recovers the known parameters") {
  const auto& r = fixture_report();
  REQUIRE(r.t1());
  REQUIRE(r.t2_star());
  REQUIRE(r.t2_echo());
  CHECK(*r.t1() == doctest::Approx(11.6e-6).epsilon(0.03));
  CHECK(*r.t2_star() == doctest::Approx(8.2e-6).epsilon(0.03));
  CHECK(*r.t2_echo() == doctest::Approx(21.6e-6).epsilon(0.05));
  REQUIRE(r.scaling_average);
  CHECK(std::abs(r.scaling_average->beta - 1.56 / 2.56) < 0.05);
  CHECK(std::abs(r.scaling_average->alpha - 1.56) < 0.35);
  CHECK(r.psd.size() == 6);
  CHECK(std::count_if(r.psd.begin(), r.psd.end(), [](const PsdRow& p) { return p.s_v.has_value(); }) == 5);
  CHECK_FALSE(r.powerlaw.empty());
  CHECK(r.thermal.size() == 50);
  CHECK(r.thermal.front().t1 > r.thermal.back().t1);
  REQUIRE(r.spectroscopy.dispersion);
  CHECK(r.spectroscopy.dispersion->params.f_ss == doctest::Approx(5.065e9).epsilon(1e-3));
  REQUIRE(r.spectroscopy.transmission);
  CHECK(r.spectroscopy.transmission->g == doctest::Approx(2 * M_PI * 6.43e6).epsilon(0.03));
  REQUIRE(r.spectroscopy.purcell_rate);
  CHECK(1.0 / *r.spectroscopy.purcell_rate == doctest::Approx(3.9e-3).epsilon(0.1));
  REQUIRE(r.drift.size() == 1);
  REQUIRE(r.drift[0].fit);
  CHECK(std::abs(r.drift[0].fit->exponent - 1.11) < 0.2);
  CHECK(r.reference.size() == 11);
}

TEST_CASE("report JSON round-trips field for field") {
  const auto& r = fixture_report();
  const auto text = report_to_json(r);
  const auto back = report_from_json(text);
  CHECK(back == r);
  CHECK(report_to_json(back) == text);
}

TEST_CASE("reruns are byte-identical apart from the timestamp") {
  const auto config = load_config(fixture_dir() / "config.json");
  const auto a = render_outputs(run_pipeline(config));
  const auto b = render_outputs(run_pipeline(config));
  REQUIRE(a.size() == b.size());
  for (const auto& [name, text] : a) CHECK(without_timestamp(text) == without_timestamp(b.at(name)));
}

TEST_CASE("provenance hashes mark exactly the dependent sections stale") {
  const auto dir = copy_fixture("prov");
  const auto config = load_config(dir / "config.json");
  const auto r = run_pipeline(config);
  CHECK(stale_sections(r, config).empty());

  fs::remove(dir / "q1_drift.csv");
  CHECK(stale_sections(r, config) == std::vector<std::string>{"drift"});

  std::ofstream(dir / "q1_two_tone.csv", std::ios::app) << "0,5e9,0\n";
  CHECK(sorted(stale_sections(r, config)) == sorted({"drift", "spectroscopy"}));

  fs::remove(dir / "q1_cpmg_n4.csv");
  CHECK(sorted(stale_sections(r, config)) ==
        sorted({"drift", "spectroscopy", "traces", "psd", "powerlaw", "scaling"}));

  fs::remove(dir / "q1_t1.csv");
  CHECK(sorted(stale_sections(r, config)) ==
        sorted({"drift", "spectroscopy", "traces", "psd", "powerlaw", "scaling", "thermal"}));
  fs::remove_all(dir);
}

TEST_CASE("validate_inputs reports every violation") {
  const auto dir = copy_fixture("bad");
  std::ofstream(dir / "q1_ramsey.csv") << "tau_s,pe\n0,0.9\n2e-6,0.5\n1e-6,0.4\n3e-6,0.3\n";
  std::ofstream(dir / "q1_t1.csv") << "tau_s,pe\n0,1.5\n1e-6,0.5\n2e-6,0.3\n";
  auto config = load_config(dir / "config.json");
  auto diags = validate_inputs(config);
  REQUIRE(diags.size() == 2);
  const auto& nm = diags[0].file.find("ramsey") != std::string::npos ? diags[0] : diags[1];
  const auto& hi = diags[0].file.find("ramsey") != std::string::npos ? diags[1] : diags[0];
  CHECK(nm.severity == io::Severity::error);
  CHECK(nm.row == 3);
  CHECK(hi.severity == io::Severity::warning);
  CHECK(hi.column == "pe");

  config.datasets.push_back({"nowhere.csv", DatasetRole::decay});
  config.pipelines.push_back("astrology");
  diags = validate_inputs(config);
  CHECK(std::count_if(diags.begin(), diags.end(),
                      [](const auto& d) { return d.severity == io::Severity::error; }) == 3);
  CHECK_THROWS_AS(run_pipeline(config), InputError);
  fs::remove_all(dir);
}

TEST_CASE("schema violations abort the run with file and column named, writing nothing") {
  const auto dir = copy_fixture("schema");
  std::ofstream(dir / "q1_echo.csv") << "tau_s,P\n0,0.9\n1e-6,0.5\n";
  const auto config = load_config(dir / "config.json");
  std::string msg;
  try {
    run_pipeline(config);
  } catch (const InputError& e) {
    msg = e.what();
  }
  CHECK(msg.find("q1_echo.csv") != std::string::npos);
  CHECK(msg.find("column 'pe'") != std::string::npos);

  CHECK(run_cli("run " + (dir / "config.json").string()) != 0);
  CHECK_FALSE(fs::exists(dir / "report"));
  fs::remove_all(dir);
}

TEST_CASE("empty dataset list is an error with no output") {
  const auto dir = scratch("empty");
  std::ofstream(dir / "config.json") << R"({"datasets": [], "output_dir": "out"})";
  const auto config = load_config(dir / "config.json");
  CHECK_THROWS_AS(run_pipeline(config), InputError);
  CHECK(run_cli("run " + (dir / "config.json").string()) != 0);
  CHECK_FALSE(fs::exists(dir / "out"));
  fs::remove_all(dir);
}

TEST_CASE("config parsing, round trip and seed override") {
  const auto c = load_config(fixture_dir() / "config.json");
  const auto back = config_from_json(config_to_json(c), c.base_dir);
  CHECK(back.datasets == c.datasets);
  CHECK(back.pipelines == c.pipelines);
  CHECK(back.seed == c.seed);
  CHECK(back.qubit.kappa == doctest::Approx(c.qubit.kappa).epsilon(1e-15));
  CHECK(back.qubit.chi == doctest::Approx(c.qubit.chi).epsilon(1e-15));
  CHECK(c.qubit.chi == doctest::Approx(-M_PI * 0.12e6));

  ::setenv("QNL_SEED", "4242", 1);
  CHECK(load_config(fixture_dir() / "config.json").seed == 4242);
  ::setenv("QNL_SEED", "12abc", 1);
  CHECK_THROWS_AS(load_config(fixture_dir() / "config.json"), InputError);
  ::unsetenv("QNL_SEED");

  CHECK_THROWS_AS(config_from_json(R"({"datasetz": []})", "."), InputError);
  CHECK_THROWS_AS(config_from_json(R"({"qubit": {"f_ss": 1}})", "."), InputError);
  CHECK_THROWS_AS(config_from_json("{", "."), InputError);
  CHECK_THROWS_AS(config_from_json(R"({"datasets": [{"path": "a", "role": "x"}]})", "."), InputError);
}

TEST_CASE("cli run writes the report and tables") {
  const auto dir = copy_fixture("clirun");
  std::string out;
  REQUIRE(run_cli("run " + (dir / "config.json").string(), &out) == 0);
  for (const char* f : {"report.json", "fits.csv", "psd.csv", "thermal.csv", "scaling.csv", "drift_psd.csv",
                        "reference_charge_noise.csv"})
    CHECK(fs::exists(dir / "report" / f));
  CHECK(out.find("T1 = ") != std::string::npos);
  const auto report = report_from_json(io::read_text(dir / "report" / "report.json"));
  CHECK(report.traces.size() == 8);
  CHECK(io::read_csv(dir / "report" / "thermal.csv", {"temp_k", "t1_s", "pe", "n_th", "gamma_phi"}).rows() == 50);
  CHECK(io::read_psd(dir / "report" / "psd.csv").size() == 11);
  CHECK(run_cli("validate " + (dir / "config.json").string()) == 0);
  fs::remove_all(dir);
}

TEST_CASE("cli single-purpose subcommands") {
  const auto dir = scratch("cli_sub");
  std::string out;

  REQUIRE(run_cli("filter-fn --n 4 --tau 40e-6 --grid 1e3:2e5:200 -o " + (dir / "g.csv").string()) == 0);
  const auto g = io::read_csv(dir / "g.csv", {"freq_hz", "g"});
  CHECK(g.rows() == 200);

  REQUIRE(run_cli("resonator-calc --tc 3.8 --rsq 64.42 --width 0.3e-6 --length 1061e-6 --fdiff 5.6681e9", &out) == 0);
  CHECK(out.find("\"z_diff\"") != std::string::npos);

  REQUIRE(run_cli("thermal-model --fq 5.065e9 --fr 5.668e9 --kappa 0.38e6 --chi -0.12e6 --t1-zero 11.6e-6 "
                  "--temps 0.01:0.5:5 -o " + (dir / "th.csv").string()) == 0);
  const auto th = io::read_csv(dir / "th.csv", {"temp_k", "t1_s", "pe", "n_th", "gamma_phi"});
  CHECK(th.rows() == 5);

  // Simulated traces feed straight back into the decay fitter.
  REQUIRE(run_cli("simulate --alpha 1.0 --amplitude 1e10 --n-pulses 2 --tau-grid 1e-6:20e-6:20 --n-traj 200 "
                  "--fmin 1e3 --fmax 5e6 --seed 3 -o " + (dir / "sim.csv").string()) == 0);
  CHECK(fs::exists(dir / "sim.json"));
  REQUIRE(run_cli("fit-decay " + (dir / "sim.csv").string(), &out) == 0);
  CHECK(out.find("\"t_phi\"") != std::string::npos);

  std::ofstream(dir / "pts.csv") << "n_pulses,t_phi_s\n2,5e-6\n4,7e-6\n8,1e-5\n";
  REQUIRE(run_cli("reconstruct-psd --points " + (dir / "pts.csv").string() + " --lever 1.807e11 -o " +
                  (dir / "psd.csv").string()) == 0);
  CHECK(io::read_psd(dir / "psd.csv").size() == 6);
  REQUIRE(run_cli("powerlaw-fit " + (dir / "psd.csv").string() + " --units freq_noise", &out) == 0);
  CHECK(out.find("\"exponent\"") != std::string::npos);

  fixture::write_q1_fixture(dir / "fx", 1, [] {
    fixture::Q1Truth t;
    t.pulse_counts = {1};
    t.n_traj = 20;
    return t;
  }());
  REQUIRE(run_cli("periodogram " + (dir / "fx" / "q1_drift.csv").string(), &out) == 0);
  CHECK(out.rfind("freq_hz,psd,units\n", 0) == 0);

  CHECK(run_cli("fit-decay " + (dir / "missing.csv").string()) == 2);
  CHECK(run_cli("filter-fn --n 4 --tau 40e-6 --grid nonsense") == 2);
  fs::remove_all(dir);
}
