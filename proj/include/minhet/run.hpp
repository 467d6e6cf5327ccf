#pragma once

#include "minhet/analysis.hpp"
#include "minhet/errors.hpp"
#include "minhet/minimizer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace minhet {

inline constexpr const char* kSummarySchemaVersion = "minhet.summary/1";
inline constexpr const char* kConfigSchemaVersion = "minhet.config/1";

/// Config error carrying the 1-based line of a syntax error (0 for semantic errors).
class ConfigError : public InputError {
 public:
  ConfigError(const std::string& what, int line = 0) : InputError(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Output directory or file could not be written.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ClampMode { Closest, Explicit, AllPairs };

struct PotentialConfig {
  Family family = Family::EFK;
  WellPotential f;
  double beta = 1.0;
  Coupling coupling;
};

struct SweepConfig {
  std::string parameter;
  std::vector<double> values;
};

struct OutputConfig {
  std::string directory = "out";
  bool svg = true;
  std::uint64_t seed = 1;
  int audit_trials = 100;
  double audit_amplitude = 1e-2;
  int validation_samples = 1000;
  int pair_cap = 16;
};

struct RunConfig {
  PotentialConfig potential;
  std::vector<Vec> a_minus_set;
  std::vector<Vec> a_plus_set;
  double q = 0.5;
  double L = 20.0;
  int N = 4000;
  double core_halfwidth = 1.0;
  ClampMode clamp = ClampMode::Closest;
  Vec clamp_minus;
  Vec clamp_plus;
  OptimizerConfig optimizer;
  std::optional<SweepConfig> sweep;
  OutputConfig output;

  PotentialSpec make_potential() const;
  EquilibriaSpec make_equilibria() const;
  /// Clamp pairs this config asks for, in (A- index, A+ index) order.
  std::vector<std::pair<Vec, Vec>> clamp_pairs() const;
  /// Canonical form with every default filled in; parse_config(to_json().dump()) round-trips.
  nlohmann::json to_json() const;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int not_converged = 3;
inline constexpr int hypothesis = 4;
}  // namespace exit_code

struct RunOutcome {
  int exit_code = exit_code::ok;
  nlohmann::json summary;
  /// Final orbit of the last stage that produced one.
  std::optional<OptimizerResult> result;
  std::vector<std::string> files;
};

/// Analysis and serialization of one solved problem. Timings go under a
/// separate "timings" key so the rest is reproducible byte for byte.
nlohmann::json summarize(const RunConfig& config, const PotentialSpec& spec, const EquilibriaSpec& eq,
                         const ValidationReport& validation, const OptimizerResult& result,
                         double initial_guess_energy);

/// validate -> initial_guess -> minimize -> analysis for the config's single
/// clamp pair. With `write` the artifacts land in config.output.directory.
RunOutcome run(const RunConfig& config, bool write = true);

/// One run per clamp pair (up to `jobs` at a time), each in its own
/// subdirectory, plus pairs.json ranking the pairs by final energy.
RunOutcome run_all_pairs(const RunConfig& config, int jobs = 1, bool write = true);

/// Warm-started sweep over config.sweep, one subdirectory per value, plus sweep.json.
RunOutcome run_sweep(const RunConfig& config, bool write = true);

/// Writes `data` to `path` through a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

}  // namespace minhet
