#pragma once

#include "cntco/circuit.hpp"
#include "cntco/optimizer.hpp"
#include "cntco/variation.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cntco {

inline constexpr const char* kConfigFormat = "cntco-config/1";

enum ExitCode : int { kExitOk = 0, kExitInfeasible = 1, kExitInput = 2, kExitNumerical = 3 };

struct Seeds {
  std::uint64_t x = 1;
  std::uint64_t mvn = 0x6d766e;
  std::uint64_t validation_x = 2;
  std::uint64_t validation_mvn = 0x76616c;
  std::uint64_t yield = 3;
  std::uint64_t mc = 4;
  std::uint64_t generator = 1;
};

struct ModelComparisonConfig {
  std::vector<std::string> netlists;  // empty: the main netlist
  std::vector<int> k_values;          // empty: 7 points from the EDP-optimal k
  int trials = 2000;
};

struct DistributionConfig {
  bool enabled = false;
  int trials = 2000;
  ProcessingParams params;
};

struct PnmvSweepConfig {
  bool enabled = false;
  std::vector<double> idcs{0.1, 0.25, 0.5, 1.0};
  long long trials = 2000000;
  bool discrete = false;  // true: renewal-process counts instead of the Gaussian model
};

struct RunConfig {
  std::filesystem::path config_path;
  std::filesystem::path base_dir;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> netlist;
  std::optional<std::filesystem::path> library;
  TechnologyParams tech;
  ProcessingParams processing;
  SearchConfig search;
  AnalysisOptions analysis;
  Seeds seeds;
  std::optional<int> k_sel_upsize;  // analyze; empty: EDP-optimal k
  std::optional<int> w_min;
  long long yield_trials = 0;  // analyze; 0 skips the yield estimate
  bool dump_constraints = false;
  std::string node_label = "module";
  GeneratorOptions generator;
  std::string generator_output = "netlist.json";
  bool validate_models = false;
  ModelComparisonConfig model_comparison;
  DistributionConfig distribution;
  PnmvSweepConfig pnmv_sweep;
  std::optional<std::filesystem::path> mvncdf_input;
  int workers = 1;
};

struct CliOverrides {
  std::optional<std::filesystem::path> out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed_override;
};

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& config_path,
                           const CliOverrides& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const CliOverrides& overrides = {});

int cmd_analyze(const RunConfig& config, std::ostream& log);
int cmd_optimize(const RunConfig& config, std::ostream& log);
int cmd_gen(const RunConfig& config, std::ostream& log);
int cmd_validate(const RunConfig& config, std::ostream& log);
int cmd_mvncdf(const RunConfig& config, std::ostream& log);
int cmd_library(const RunConfig& config, std::ostream& log);

// Whitespace-separated text: p rows of C followed by one row of bounds.
MvnProblem parse_mvn_text(const std::string& text);

// Full command line: subcommand plus flags. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cntco
