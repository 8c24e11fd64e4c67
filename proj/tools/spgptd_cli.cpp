#include <CLI11.hpp>
#include <iostream>

#include "spgptd/cli.hpp"

namespace {

void add_common_flags(CLI::App* cmd, std::string& config_path,
                      spgptd::cli::ConfigOverrides& overrides) {
  cmd->add_option("--config", config_path, "JSON config file");
  cmd->add_option("--seed", overrides.seed, "RNG seed");
  cmd->add_option("--out", overrides.out_dir, "output directory");
  cmd->add_option("--gamma", overrides.gamma, "discount factor");
  cmd->add_option("--sigma2", overrides.sigma2, "TD noise variance");
  cmd->add_option("--episodes", overrides.episodes, "episode count (run)");
  cmd->add_option("--steps", overrides.steps, "transition count (bench)");
  cmd->add_option("--transitions", overrides.transitions,
                  "trajectory length (posterior)");
  cmd->add_option("--pseudo-count", overrides.pseudo_count,
                  "pseudo-input count");
  cmd->add_option("--refine-budget", overrides.refine_budget,
                  "likelihood evaluations for refinement");
  cmd->add_option("--grid-points", overrides.grid_points,
                  "query grid size (posterior)");
  cmd->add_option("--policy", overrides.policy,
                  "behavior policy: right, left or random");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse GP temporal-difference value estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  spgptd::cli::ConfigOverrides overrides;

  auto* validate =
      app.add_subcommand("validate", "run the numerical validation suites");
  auto* bench = app.add_subcommand(
      "bench", "time recursive updates against from-scratch rebuilds");
  auto* posterior = app.add_subcommand(
      "posterior", "dump exact/sparse posterior curves on the 1-D toy");
  auto* run =
      app.add_subcommand("run", "policy evaluation on a simulated MDP");
  for (auto* cmd : {validate, bench, posterior, run}) {
    add_common_flags(cmd, config_path, overrides);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const spgptd::cli::ExperimentConfig config =
        spgptd::cli::load_config(command, config_path, overrides);
    if (command == "validate") {
      return spgptd::cli::cmd_validate(config);
    }
    if (command == "bench") {
      return spgptd::cli::cmd_bench(config);
    }
    if (command == "posterior") {
      return spgptd::cli::cmd_posterior(config);
    }
    return spgptd::cli::cmd_run(config);
  } catch (const spgptd::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const spgptd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
