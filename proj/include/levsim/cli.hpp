#ifndef LEVSIM_CLI_HPP
#define LEVSIM_CLI_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "levsim/units.hpp"

// Configuration-driven experiment runner. A scenario is described by a flat
// key = value config file with [sections], overridable by command-line flags
// (flags > file > defaults); each run writes deterministic CSV/JSON artifacts
// plus a manifest.json recording the fully resolved configuration.
namespace levsim::cli {

// Configuration problem: unknown key, malformed or out-of-range value,
// incompatible combination. The message names the offending key. Exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem problem: unreadable config, unwritable output. Exit 4.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Discretization settings shared by the scenarios ([numerics] section).
struct NumericsConfig {
  int fock_dim = 0;        // Fock truncation; 0 = automatic per protocol
  int grid_points = 65536; // position grid points (power of two)
  double grid_extent = 4e-6; // position grid full width [m]
  int time_samples = 0;    // trace/scan samples; 0 = per-protocol default
};

// Artifact destination ([output] section).
struct OutputConfig {
  std::string path;          // output directory; empty = "." (LEVSIM_OUT
                             // overrides file/default, flags override both)
  std::string format = "csv"; // table artifacts: "csv" or "json"
};

// Scenario-specific knobs ([scenario] section).
struct ScenarioKnobs {
  int n = -1;      // phonon number for cat/interference/qnd; -1 = per-scenario
                   // default (qnd: 1, others: 0)
  int n_max = 5;   // fock-ladder target
  int sign = +1;   // branch recombination sign, +1 or -1
  double hold_time = 0.0; // qnd hold [s]; 0 = pi/(2|chi|)
  std::vector<double> nbar = {0.0, 0.01, 0.1}; // thermal occupations
  std::vector<double> s = {4.0, 6.3, 10.0, 20.0, 40.0, 100.0}; // scan ratios
};

// Sweep axis ([sweep] section): one row per value of the named parameter.
struct SweepConfig {
  std::string param;          // G | omega_m2 | d | nbar | s
  std::vector<double> values; // empty list => empty table
  bool has_values = false;    // distinguishes "values =" from no sweep at all
};

// Full resolved run description.
struct ScenarioConfig {
  std::string experiment; // fidelity-scan | fock-ladder | qnd | cat |
                          // interference | thermal | decoherence | sweep-Dm
  ExperimentParams params;
  NumericsConfig numerics;
  OutputConfig output;
  ScenarioKnobs scenario;
  SweepConfig sweep;
  int jobs = 0; // sweep worker threads; 0 = hardware concurrency (flag only)
};

// Applies one dotted key ("params.gradient", "experiment") with a textual
// value. Throws ConfigError naming the key on any problem.
void apply_key(ScenarioConfig& cfg, const std::string& key,
               const std::string& value);

// Parses a complete config file body (strict: unknown keys and duplicate
// keys rejected; every numeric range-checked). `filename` only labels error
// messages. Throws ConfigError.
void parse_config_text(ScenarioConfig& cfg, const std::string& text,
                       const std::string& filename);

// Cross-field validation: experiment name known, sweep axis compatible with
// the experiment, output format known. Throws ConfigError.
void validate_config(const ScenarioConfig& cfg);

// Documentation of every config key, rendered into --help.
std::string schema_help();

} // namespace levsim::cli

namespace levsim {
// Entry point used by the levsim binary. Exit codes: 0 success, 2 config
// error, 3 numeric failure, 4 I/O failure.
int cli_main(int argc, char** argv);
} // namespace levsim

#endif
