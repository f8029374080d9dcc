// mintime-qm: run the named experiments and write CSV data plus a manifest.
//
// Exit codes: 0 all checks passed, 1 usage error, 2 numerical-gate failure.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mintime/errors.hpp"
#include "mintime/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

void print_defaults(const mintime::ExperimentInfo& info) {
  std::printf("# %s\n", info.name.c_str());
  for (const auto& [key, value] : info.defaults) std::printf("%s = %.17g\n", key.c_str(), value);
}

void print_checks(const std::string& experiment, const std::vector<mintime::CheckResult>& checks) {
  for (const auto& c : checks) {
    std::printf("%-18s %-42s %-4s residual=%-24.16e tol=%.3e\n", experiment.c_str(), c.name.c_str(),
                c.passed ? "PASS" : "FAIL", c.residual, c.tolerance);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum time evolution with a minimal time scale"};
  app.require_subcommand(0, 1);
  bool print_all_defaults = false;
  app.add_flag("--print-defaults", print_all_defaults, "Print every experiment's default parameters");

  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write CSV + manifest.json");
  std::string experiment;
  std::vector<std::string> params;
  std::string config_file;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool print_run_defaults = false;
  run_cmd->add_option("experiment", experiment, "Experiment name (see 'list')")->required();
  run_cmd->add_option("--param,-p", params, "Override a parameter, key=value (repeatable)");
  run_cmd->add_option("--config", config_file, "key=value parameter file; --param takes precedence");
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--seed", seed, "Seed for randomized sweeps");
  run_cmd->add_flag("--print-defaults", print_run_defaults, "Print this experiment's defaults and exit");

  auto* list_cmd = app.add_subcommand("list", "List experiments");

  auto* verify_cmd = app.add_subcommand("verify", "Run every experiment with defaults and print the check table");
  std::uint64_t verify_seed = 0;
  verify_cmd->add_option("--seed", verify_seed, "Seed for randomized sweeps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (print_all_defaults) {
      for (const auto& info : mintime::experiment_catalog()) print_defaults(info);
      return kExitOk;
    }
    if (*list_cmd) {
      for (const auto& info : mintime::experiment_catalog()) {
        std::printf("%-18s %s\n", info.name.c_str(), info.summary.c_str());
      }
      return kExitOk;
    }
    if (*run_cmd) {
      if (print_run_defaults) {
        print_defaults(mintime::find_experiment(experiment));
        return kExitOk;
      }
      mintime::ParamMap overrides;
      if (!config_file.empty()) overrides = mintime::parse_key_value_file(config_file);
      for (const auto& item : params) {
        const auto [key, value] = mintime::parse_key_value(item);
        overrides[key] = value;
      }
      const auto config = mintime::make_config(experiment, overrides, out_dir, seed);
      const auto manifest = mintime::run(config);
      print_checks(experiment, manifest.checks);
      for (const auto& f : manifest.outputs) std::printf("wrote %s/%s\n", out_dir.c_str(), f.c_str());
      std::printf("wrote %s/manifest.json\n", out_dir.c_str());
      return manifest.passed ? kExitOk : kExitNumerical;
    }
    if (*verify_cmd) {
      bool all = true;
      for (const auto& info : mintime::experiment_catalog()) {
        const auto result = mintime::run_experiment(mintime::make_config(info.name, {}, ".", verify_seed));
        print_checks(info.name, result.checks);
        for (const auto& c : result.checks) all = all && c.passed;
      }
      std::printf("%s\n", all ? "all checks passed" : "some checks FAILED");
      return all ? kExitOk : kExitNumerical;
    }
    std::fputs(app.help().c_str(), stdout);
    return kExitUsage;
  } catch (const mintime::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const mintime::NumericalError& e) {
    std::fprintf(stderr, "numerical gate failed: %s (residual %.3e)\n", e.what(), e.residual());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
}
