// Command-line harness: goalspace -> learn -> evaluate -> abundance, plus
// the cma-bench test-function run.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "babbling/errors.hpp"
#include "babbling/experiment.hpp"

namespace ex = babbling::experiment;

int main(int argc, char** argv) {
  CLI::App app{"Goal babbling and local motor babbling on a simulated 24-muscle arm"};
  app.require_subcommand(1);

  std::string config_file;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> overrides;

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"goalspace", "sample the empirical goal space, build its hull and the X_C grid"},
      {"learn", "run directed online goal babbling on X_C and derive X_S"},
      {"evaluate", "evaluate the learned model on X_C and X_S"},
      {"abundance", "local online motor babbling and mixture report per goal"},
      {"cma-bench", "CMA-ES on the sphere and Rosenbrock functions"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_file, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "seed for every random stream")->required();
    sub->add_option("--out", out_dir, "output directory (default: out)");
    sub->add_option("--set", overrides, "override a field, e.g. --set babble.total_samples=4000");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ex::kConfigError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  ex::ExperimentConfig config;
  try {
    config = ex::load_config(config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_file),
                             overrides, seed,
                             out_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_dir));
  } catch (const babbling::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ex::kConfigError;
  }

  const std::string name = chosen->get_name();
  try {
    if (name == "goalspace") return ex::cmd_goalspace(config, std::cout);
    if (name == "learn") return ex::cmd_learn(config, std::cout);
    if (name == "evaluate") return ex::cmd_evaluate(config, std::cout);
    if (name == "abundance") return ex::cmd_abundance(config, std::cout);
    return ex::cmd_cma_bench(config, std::cout);
  } catch (const babbling::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ex::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << name << " failed: " << e.what() << '\n';
    return ex::kFailure;
  }
}
