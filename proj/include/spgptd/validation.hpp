#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spgptd/simenv.hpp"

namespace spgptd::validation {

struct SuiteResult {
  std::string suite;
  long cases{0};
  double max_error{0.0};
  double tolerance{0.0};
  bool pass{false};
  double seconds{0.0};
};

/// Seeded SPD matrices grown one border at a time; the incrementally
/// maintained inverse must match a from-scratch dense inversion.
SuiteResult partition_lemma_suite(int instances, std::uint64_t seed,
                                  double tolerance);

/// Seeded interleavings of transition / pseudo-input / combined updates;
/// final recursive (alpha, P) and random-query predictions must match the
/// dense batch recomputation. Errors are relative to 1 + the reference
/// max-norm.
SuiteResult oracle_equivalence_suite(int interleavings, std::uint64_t seed,
                                     double tolerance);

/// Pseudo set equal to the input set: the sparse posterior must collapse
/// onto the exact one.
SuiteResult zx_degeneracy_suite(int datasets, std::uint64_t seed,
                                double tolerance);

/// Precomposed-parameter predictions against the per-query dense reference
/// route.
SuiteResult dual_route_suite(int instances, std::uint64_t seed,
                             double tolerance);

/// TD-differenced kernel scalar nonnegativity and noise-diagonal
/// positivity; max_error reports the worst violation observed.
SuiteResult nonnegativity_suite(long evaluations, std::uint64_t seed);

struct BenchRow {
  int step{0};
  double recursive_update_seconds{0.0};
  double batch_rebuild_seconds{0.0};
  int k{0};
  int t{0};
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double recursive_early_mean{0.0};  // steps 50..150
  double recursive_late_mean{0.0};   // steps 400..500
  double batch_early_mean{0.0};
  double batch_late_mean{0.0};
  double max_spot_error{0.0};  // recursive vs batch prediction agreement
};

/// Times each recursive per-transition update against a from-scratch batch
/// rebuild on the same growing trajectory, spot-checking that both paths
/// keep predicting the same posterior.
BenchResult run_incremental_bench(int n_steps, int m_pseudo,
                                  std::uint64_t seed, int spot_interval,
                                  double spot_tolerance);

struct PosteriorCurves {
  std::vector<double> grid;
  std::vector<double> exact_mean, exact_var;
  std::vector<double> random_mean, random_var;
  std::vector<double> refined_mean, refined_var;
  double rmse_random{0.0};
  double rmse_refined{0.0};
};

/// Drives the 1-D toy task, then compares the exact posterior against the
/// sparse one under randomly subsampled and likelihood-refined pseudo
/// inputs on a state grid (queried at the positive-drift action).
PosteriorCurves posterior_comparison(const Hyperparams& hyper,
                                     int transitions, int n_pseudo,
                                     long refine_budget, int grid_points,
                                     std::uint64_t seed);

struct ChainEvalResult {
  std::vector<ValueTableRow> table;
  Eigen::MatrixXd dp;  // n_states x n_actions
  double max_abs_error{0.0};
};

/// Policy evaluation on a finite chain with the recursive estimator,
/// judged against the dynamic-programming value oracle over all
/// state-action pairs.
ChainEvalResult chain_policy_eval(const MdpSpec& mdp,
                                  const std::string& policy,
                                  const Hyperparams& hyper, int episodes,
                                  std::uint64_t seed);

/// Pseudo-input initialization rules shared by the CLI and the harness:
/// "uniform-grid" lays points over the state range crossed with every
/// action; "subsample" picks distinct training inputs.
PseudoInputSet init_pseudo_grid(const MdpSpec& mdp, int count);
PseudoInputSet subsample_pseudo(const std::vector<StateAction>& inputs,
                                int count, std::uint64_t seed);

}  // namespace spgptd::validation
