#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "spgptd/validation.hpp"

namespace spgptd::cli {

/// Effective run configuration. Precedence: command-line flags over config
/// file over per-command defaults. Numeric ranges are validated at parse
/// time; violations exit with status 2.
struct ExperimentConfig {
  Hyperparams hyper{KernelSpec::isotropic(2, 1.0, 1.0), 0.9, 0.01};
  MdpSpec mdp;
  std::string policy{"right"};

  int pseudo_count{10};
  std::string pseudo_init{"subsample"};  // or "uniform-grid"

  int episodes{20};
  int max_episode_steps{100};
  int steps{500};        // bench transition count
  int transitions{40};   // posterior-curve trajectory length
  long refine_budget{2000};
  int grid_points{101};

  std::uint64_t seed{42};
  std::string out_dir{"out"};

  // suite sizes and tolerances for `validate`
  int lemma_instances{200};
  int oracle_interleavings{50};
  int zx_datasets{10};
  int dual_instances{30};
  long nonneg_evaluations{10000};
  double tol_lemma{1e-9};
  double tol_oracle{1e-8};
  double tol_zx{1e-8};
  double tol_dual{1e-8};

  std::uint64_t hash() const;  // FNV-1a over the canonical JSON form
  std::string to_json_string() const;
};

/// Flag-level overrides collected by the executable front end.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<double> gamma;
  std::optional<double> sigma2;
  std::optional<int> episodes;
  std::optional<int> steps;
  std::optional<int> transitions;
  std::optional<int> pseudo_count;
  std::optional<long> refine_budget;
  std::optional<int> grid_points;
  std::optional<std::string> policy;
};

/// Builds the effective config for a command: per-command defaults, then
/// the JSON file at config_path (if nonempty), then flag overrides.
/// Throws ConfigError on unknown fields, malformed JSON, or invalid values.
ExperimentConfig load_config(const std::string& command,
                             const std::string& config_path,
                             const ConfigOverrides& overrides);

// Commands return process exit codes: 0 success, 1 suite/assertion
// failure. Configuration problems throw ConfigError (exit 2 in main).
int cmd_validate(const ExperimentConfig& config);
int cmd_bench(const ExperimentConfig& config);
int cmd_posterior(const ExperimentConfig& config);
int cmd_run(const ExperimentConfig& config);

}  // namespace spgptd::cli
