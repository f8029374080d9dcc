#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <doctest.h>
#include <json.hpp>

#include "mintime/errors.hpp"
#include "mintime/experiments.hpp"

using namespace mintime;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mintime_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MINTIME_QM_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("catalog: names are unique and every experiment has defaults") {
  std::set<std::string> names;
  for (const auto& info : experiment_catalog()) {
    CHECK(names.insert(info.name).second);
    CHECK_FALSE(info.summary.empty());
    CHECK_FALSE(info.defaults.empty());
  }
  for (const char* n : {"gup-surface", "spin-precession", "two-spin-entropy", "three-spin", "free-packet",
                        "oscillator", "transforms-verify", "theorem-a1"}) {
    CHECK(names.count(n) == 1);
  }
  CHECK_THROWS_AS(find_experiment("no-such-thing"), UsageError);
}

TEST_CASE("make_config: overrides, unknown keys, non-finite values") {
  const auto cfg = make_config("spin-precession", {{"omega0", 3.5}}, "out", 9);
  CHECK(cfg.parameters.at("omega0") == 3.5);
  CHECK(cfg.parameters.at("kappa") == find_experiment("spin-precession").defaults.at("kappa"));
  CHECK(cfg.seed == 9);
  CHECK(cfg.output_dir == fs::path("out"));
  CHECK_THROWS_AS(make_config("spin-precession", {{"omega_0", 1.0}}), UsageError);
  CHECK_THROWS_AS(make_config("spin-precession", {{"omega0", std::numeric_limits<double>::infinity()}}), UsageError);
  CHECK_THROWS_AS(make_config("bogus"), UsageError);
}

TEST_CASE("key=value parsing") {
  const auto [k, v] = parse_key_value(" kappa = 0.25 ");
  CHECK(k == "kappa");
  CHECK(v == 0.25);
  CHECK(parse_key_value("n=1e3").second == 1000.0);
  CHECK_THROWS_AS(parse_key_value("kappa"), UsageError);
  CHECK_THROWS_AS(parse_key_value("=1"), UsageError);
  CHECK_THROWS_AS(parse_key_value("kappa=abc"), UsageError);
  CHECK_THROWS_AS(parse_key_value("kappa=1.0x"), UsageError);

  const auto m = parse_key_value_text("# comment\n\nkappa = 0.5  # trailing\nomega0=2\n");
  CHECK(m.size() == 2);
  CHECK(m.at("kappa") == 0.5);
  CHECK(m.at("omega0") == 2.0);
  CHECK_THROWS_AS(parse_key_value_text("a=1\na=2\n"), UsageError);
  CHECK_THROWS_AS(parse_key_value_file("/nonexistent/file.toml"), UsageError);
}

TEST_CASE("make_check and CSV formatting") {
  CHECK(make_check("a", 1e-9, 1e-8).passed);
  CHECK(make_check("a", 1e-8, 1e-8).passed);
  CHECK_FALSE(make_check("a", 2e-8, 1e-8).passed);
  CHECK_FALSE(make_check("a", std::nan(""), 1.0).passed);

  CHECK(format_double(1.0) == "1.0000000000000000e+00");
  CHECK(format_double(-0.1) == "-1.0000000000000001e-01");
  // Round trip is exact.
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);

  const CsvTable t{"t.csv", {"x", "y"}, {{0.0, 1.0}, {2.0, 0.5}}};
  CHECK(format_csv(t) == "x,y\n0.0000000000000000e+00,1.0000000000000000e+00\n"
                         "2.0000000000000000e+00,5.0000000000000000e-01\n");
  const CsvTable bad{"bad.csv", {"x"}, {{std::numeric_limits<double>::quiet_NaN()}}};
  CHECK_THROWS_AS(format_csv(bad), NumericalError);
  const CsvTable ragged{"r.csv", {"x", "y"}, {{1.0}}};
  CHECK_THROWS_AS(format_csv(ragged), PreconditionError);
}

TEST_CASE("manifest JSON") {
  RunManifest m;
  m.experiment = "theorem-a1";
  m.seed = 4;
  m.parameters = {{"n_cases", 3}};
  m.checks = {make_check("c", std::numeric_limits<double>::infinity(), 1.0)};
  m.outputs = {"theorem_a1.csv"};
  const auto j = nlohmann::json::parse(manifest_json(m));
  CHECK(j["experiment"] == "theorem-a1");
  CHECK(j["tool_version"] == kToolVersion);
  CHECK(j["seed"] == 4);
  CHECK(j["parameters"]["n_cases"] == 3.0);
  CHECK(j["checks"][0]["passed"] == false);
  CHECK(j["checks"][0]["residual"].is_string());
  CHECK(j["outputs"][0] == "theorem_a1.csv");
  CHECK(j["passed"] == false);
}

TEST_CASE("run writes CSV files with headers and a manifest") {
  const auto dir = scratch_dir("run");
  const auto m = run(make_config("theorem-a1", {{"n_cases", 5}}, dir, 3));
  CHECK(m.passed);
  REQUIRE(m.outputs.size() == 1);
  const auto csv = slurp(dir / m.outputs[0]);
  CHECK(csv.rfind("case,", 0) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(j["passed"] == true);
  CHECK(j["seed"] == 3);
  fs::remove_all(dir);
}

TEST_CASE("randomized experiments depend only on the seed") {
  const auto a = run_experiment(make_config("theorem-a1", {{"n_cases", 6}}, ".", 11));
  const auto b = run_experiment(make_config("theorem-a1", {{"n_cases", 6}}, ".", 11));
  const auto c = run_experiment(make_config("theorem-a1", {{"n_cases", 6}}, ".", 12));
  CHECK(format_csv(a.tables[0]) == format_csv(b.tables[0]));
  CHECK(format_csv(a.tables[0]) != format_csv(c.tables[0]));
}

TEST_CASE("parallel_for visits each index once; MINTIME_QM_THREADS caps workers") {
  ::setenv("MINTIME_QM_THREADS", "1", 1);
  CHECK(sweep_threads() == 1);
  ::setenv("MINTIME_QM_THREADS", "junk", 1);
  CHECK(sweep_threads() >= 1);
  ::setenv("MINTIME_QM_THREADS", "3", 1);
  CHECK(sweep_threads() <= 3);
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  ::unsetenv("MINTIME_QM_THREADS");
}

TEST_CASE("random_commuting_pair builds commuting operators agreeing on psi") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const auto c = random_commuting_pair(rng);
    const Eigen::MatrixXcd a = c.a.matrix(), b = c.b.matrix();
    CHECK((a * b - b * a).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a * c.psi - b * c.psi).norm() < 1e-10);
    CHECK(c.psi.norm() == doctest::Approx(1.0));
  }
  std::mt19937_64 r1(1), r2(1);
  CHECK(uniform01(r1) == uniform01(r2));
}

TEST_CASE("CLI exit codes") {
  const auto dir = scratch_dir("cli");
  const auto log = dir / "log.txt";
  CHECK(run_cli("list", log) == 0);
  CHECK(slurp(log).find("three-spin") != std::string::npos);
  CHECK(run_cli("--print-defaults", log) == 0);
  CHECK(run_cli("run spin-precession --print-defaults", log) == 0);
  CHECK(slurp(log).find("omega0") != std::string::npos);

  CHECK(run_cli("run spin-precession --out " + (dir / "ok").string(), log) == 0);
  CHECK(fs::exists(dir / "ok" / "manifest.json"));
  CHECK(fs::exists(dir / "ok" / "spin_precession_frequency.csv"));

  // Usage errors.
  CHECK(run_cli("run no-such-experiment", log) == 1);
  CHECK(run_cli("run spin-precession --param nope=1", log) == 1);
  CHECK(run_cli("run spin-precession --param kappa", log) == 1);
  CHECK(run_cli("run spin-precession --param kappa=-1", log) == 1);
  CHECK(run_cli("frobnicate", log) == 1);
  CHECK(run_cli("run spin-precession --config " + (dir / "missing.toml").string(), log) == 1);

  // Config file, with --param taking precedence.
  {
    std::ofstream cfg(dir / "p.toml");
    cfg << "# spin\nomega0 = 3\nkappa = 0.5\n";
  }
  CHECK(run_cli("run spin-precession --config " + (dir / "p.toml").string() + " -p kappa=0.25 --out " +
                    (dir / "cfg").string(),
                log) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "cfg" / "manifest.json"));
  CHECK(j["parameters"]["omega0"] == 3.0);
  CHECK(j["parameters"]["kappa"] == 0.25);

  // A numerical gate: too few Fock states for the coherent state.
  CHECK(run_cli("run oscillator -p n_max=3 --out " + (dir / "gate").string(), log) == 2);
  CHECK(slurp(log).find("numerical gate") != std::string::npos);
  fs::remove_all(dir);
}
