#pragma once

// Named experiments behind the command-line tool. Each experiment turns a flat
// parameter map into CSV tables plus a list of named cross-checks; run()
// additionally writes the tables and a JSON manifest to disk.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mintime/clock_space.hpp"
#include "mintime/operator_calculus.hpp"

namespace mintime {

inline constexpr const char* kToolVersion = "0.1.0";

/// Invalid configuration (unknown experiment or key, malformed value).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using ParamMap = std::map<std::string, double>;

struct ExperimentInfo {
  std::string name;
  std::string summary;
  ParamMap defaults;
};

const std::vector<ExperimentInfo>& experiment_catalog();
const ExperimentInfo& find_experiment(const std::string& name);

struct ExperimentConfig {
  std::string experiment;
  ParamMap parameters;  // fully resolved
  std::filesystem::path output_dir = ".";
  std::uint64_t seed = 0;
};

/// Defaults overlaid with `overrides`; unknown keys and non-finite values are
/// rejected with a UsageError naming the key.
ExperimentConfig make_config(const std::string& experiment, const ParamMap& overrides = {},
                             std::filesystem::path output_dir = ".", std::uint64_t seed = 0);

/// Parse `key=value` (a TOML-compatible subset: `#` comments, blank lines,
/// optional spaces and quotes-free numeric values).
ParamMap parse_key_value_text(const std::string& text, const std::string& origin = "<text>");
ParamMap parse_key_value_file(const std::filesystem::path& path);
/// One `key=value` pair from the command line.
std::pair<std::string, double> parse_key_value(const std::string& item);

struct CheckResult {
  std::string name;
  bool passed = false;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string note;
};

/// Record `residual <= tolerance` (NaN fails).
CheckResult make_check(std::string name, double residual, double tolerance, std::string note = {});

struct CsvTable {
  std::string file_name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// `%.16e` (17 significant digits), round-trip exact for doubles.
std::string format_double(double v);
/// Header plus rows; throws NumericalError on a non-finite entry.
std::string format_csv(const CsvTable& table);

struct ExperimentResult {
  std::vector<CsvTable> tables;
  std::vector<CheckResult> checks;
};

/// Pure computation; no files are touched.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct RunManifest {
  std::string experiment;
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  ParamMap parameters;
  std::vector<CheckResult> checks;
  std::vector<std::string> outputs;
  bool passed = false;
};

std::string manifest_json(const RunManifest& manifest);

/// Runs the experiment, writes every CSV and manifest.json into
/// config.output_dir. A table with a non-finite value is not written and is
/// recorded as a failed check.
RunManifest run(const ExperimentConfig& config);

// --- sweep parallelism ----------------------------------------------------------

/// Worker count: hardware concurrency capped by MINTIME_QM_THREADS.
unsigned sweep_threads();
/// body(i) for i in [0, n); each index is handled by exactly one worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// --- randomized inputs for property sweeps ---------------------------------------

/// Uniform double in [0, 1) from the top 53 bits (independent of the
/// standard library's distribution implementation).
double uniform01(std::mt19937_64& rng);

/// One or two Gaussian bumps in the warped variable with random phases and
/// slopes; smooth and effectively band limited.
FrequencyWavefunction random_smooth_state(FrequencyGridPtr grid, std::mt19937_64& rng);

/// A = p(C), B = A + (C - c_j) r(C) for a random Hermitian C (spectral radius
/// about 1) and random cubic p, r; psi is the eigenvector of C for c_j. A and
/// B commute and act identically on psi.
struct CommutingPairCase {
  HermitianOperatord a;
  HermitianOperatord b;
  Eigen::VectorXcd psi;
};
CommutingPairCase random_commuting_pair(std::mt19937_64& rng);

}  // namespace mintime
