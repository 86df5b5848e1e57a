#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "babbling/abundance.hpp"
#include "babbling/babble.hpp"
#include "babbling/cmaes.hpp"
#include "babbling/invmodel.hpp"
#include "babbling/io.hpp"
#include "babbling/plant.hpp"

namespace babbling::experiment {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDegenerateHull = 3,
  kMissingArtifacts = 4,
  kGoalOutOfRange = 5,
};

struct GoalSpaceConfig {
  int empirical_count = 2000;  // random postures behind the empirical goal space
  double spacing = 0.03;       // grid step, metres
  double outlier_radius = 0.02;
};

struct BenchConfig {
  int sphere_dim = 5;
  long sphere_budget = 2000;
  double sphere_target = 1e-10;
  int rosen_dim = 2;
  long rosen_budget = 20000;
  double rosen_target = 1e-6;
  double sphere_sigma0 = 0.5;  // from the all-ones start
  double rosen_sigma0 = 0.3;   // from (-1, 1, 1, ...)
};

/// Everything a subcommand needs. `seed` drives every random stream,
/// including the plant's sensor noise (plant.seed is overwritten from it).
struct ExperimentConfig {
  PlantConfig plant = PlantConfig::default_arm();
  BabbleConfig babble;
  InverseModelConfig model;
  GoalSpaceConfig goalspace;
  io::Json cma = io::Json::object();  // overrides on top of CmaConfig::defaults(24)
  AbundanceConfig abundance;
  std::vector<int> abundance_goals;   // ids into X_S; empty selects 10 spread goals
  int auto_goal_count = 10;
  BenchConfig bench;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;

  /// The 24-dimensional strategy used for local motor babbling.
  cma::CmaConfig strategy() const;
  /// Validates every sub-configuration. Throws ConfigError.
  void validate() const;
};

io::Json to_json(const ExperimentConfig& c);
/// Overlays the keys present in `j` onto `c`. Unknown keys throw ConfigError.
void from_json(const io::Json& j, ExperimentConfig& c);

/// Defaults, then the optional JSON file, then each "dotted.key=value"
/// override (value parsed as JSON, else taken as a string), then seed and
/// output directory. Throws ConfigError on any problem.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides, std::uint64_t seed,
                             const std::optional<std::filesystem::path>& output_dir);

/// FNV-1a of the canonical JSON of the config without the output directory.
std::string config_hash(const ExperimentConfig& c);

// Subcommands. Each writes under config.output_dir, prints a short summary
// to `out` and returns an ExitCode.
int cmd_goalspace(const ExperimentConfig& config, std::ostream& out);
int cmd_learn(const ExperimentConfig& config, std::ostream& out);
int cmd_evaluate(const ExperimentConfig& config, std::ostream& out);
int cmd_abundance(const ExperimentConfig& config, std::ostream& out);
int cmd_cma_bench(const ExperimentConfig& config, std::ostream& out);

}  // namespace babbling::experiment
