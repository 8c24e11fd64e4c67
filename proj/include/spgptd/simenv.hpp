#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spgptd/batch.hpp"
#include "spgptd/recursive.hpp"

namespace spgptd {

enum class MdpKind { chain, toy1d };

/// Desk-scale MDPs.
///
/// chain: states 0..n_states-1, actions {left, right}. Moves are
/// deterministic with clipping at the left edge; taking `right` in the
/// rightmost state ends the episode with goal_reward. Every other step
/// pays step_reward.
///
/// toy1d: state in [0, 1], two drift actions; the action encoding is the
/// drift itself. Reward is the negative distance of the next state from
/// the target at 0.5. Continuing (no terminal transitions).
struct MdpSpec {
  MdpKind kind{MdpKind::chain};
  int n_states{5};
  double goal_reward{1.0};
  double step_reward{0.0};
  double gamma{0.9};
  std::vector<double> actions{-1.0, +1.0};

  void validate() const;
  bool finite() const { return kind == MdpKind::chain; }

  /// Inputs to the estimators: state coordinate(s) then the action encoding.
  StateAction encode(double state, int action_index) const;
};

inline constexpr double kToy1dTarget = 0.5;

struct StepResult {
  double next_state;
  double reward;
  bool terminal;
};

StepResult step(const MdpSpec& mdp, double state, int action_index,
                std::mt19937_64& rng);

/// Greedy in the predicted mean with probability 1-epsilon (ties broken by
/// the lowest action index), uniform otherwise.
int epsilon_greedy(
    const std::function<PredictiveMoments(const StateAction&)>& predictor,
    const MdpSpec& mdp, double state, double epsilon, std::mt19937_64& rng);

/// A fixed behavior policy for evaluation runs. `probs(s)` gives the
/// action distribution at a finite-MDP state.
struct FixedPolicy {
  std::string descriptor;
  std::function<int(const MdpSpec&, double state, std::mt19937_64&)> sample;
  std::function<Eigen::VectorXd(const MdpSpec&, int state)> probs;
};

/// Builders for the named policies: "right", "left", "random".
FixedPolicy make_policy(const std::string& descriptor);

struct LoggedTransition {
  StateAction x;
  double reward;
  StateAction x_next;
  bool terminal;
};

/// Raw interaction record of one episode. The final transition's x_next is
/// the first input of the following episode (or the would-be next start),
/// matching what the estimator was fed; a terminal flag means that column
/// is uncoupled.
struct EpisodeLog {
  std::vector<LoggedTransition> transitions;
  std::uint64_t seed{0};
  std::string policy;

  /// Same flat record format as TransitionDataset::write_csv.
  void write_csv(std::ostream& os) const;
};

/// One value-table row per queried state-action pair.
struct ValueTableRow {
  double state;
  int action_index;
  double mean;
  double variance;
};

/// Common interface over the two estimators so harness results can be
/// compared like for like.
class ValueEstimator {
 public:
  virtual ~ValueEstimator() = default;
  virtual void begin(const StateAction& x_first) = 0;
  virtual void add(double reward, const StateAction& x_next,
                   bool terminal) = 0;
  virtual PredictiveMoments predict(const StateAction& x) const = 0;
};

class RecursiveEstimator final : public ValueEstimator {
 public:
  RecursiveEstimator(Hyperparams params, PseudoInputSet pseudo)
      : params_(std::move(params)), pseudo_(std::move(pseudo)) {}

  void begin(const StateAction& x_first) override;
  void add(double reward, const StateAction& x_next, bool terminal) override;
  PredictiveMoments predict(const StateAction& x) const override;

  const RecursiveState& state() const { return *state_; }

 private:
  Hyperparams params_;
  PseudoInputSet pseudo_;
  std::optional<RecursiveState> state_;
};

/// Dense recomputation behind the same interface; parameters are rebuilt
/// lazily whenever data changed since the last prediction.
class BatchEstimator final : public ValueEstimator {
 public:
  BatchEstimator(Hyperparams params, PseudoInputSet pseudo)
      : params_(std::move(params)), pseudo_(std::move(pseudo)) {}

  void begin(const StateAction& x_first) override;
  void add(double reward, const StateAction& x_next, bool terminal) override;
  PredictiveMoments predict(const StateAction& x) const override;

 private:
  Hyperparams params_;
  PseudoInputSet pseudo_;
  std::optional<TransitionDataset> dataset_;
  mutable std::optional<PosteriorParams> cache_;
};

struct PolicyEvaluationResult {
  std::vector<EpisodeLog> episodes;
  std::vector<ValueTableRow> value_table;
};

/// Runs `episodes` episodes of the fixed policy, feeding every transition
/// into the estimator as it happens. Episode starts cycle through all
/// state/first-action pairs (exploring starts) so each pair receives
/// on-policy data; afterwards the value table covers every pair of a
/// finite MDP (or a state grid for toy1d). Episodes are capped at
/// max_episode_steps; a capped episode is closed with a terminal row.
PolicyEvaluationResult run_policy_evaluation(
    const MdpSpec& mdp, const FixedPolicy& policy, ValueEstimator& estimator,
    int episodes, std::uint64_t seed, int max_episode_steps = 100);

/// Exact per-pair values of the fixed policy from the linear Bellman
/// system; n_states x n_actions. Throws NotFinite when the system is
/// singular (gamma = 1 without absorbing structure).
Eigen::MatrixXd dp_value_oracle(const MdpSpec& mdp, const FixedPolicy& policy);

}  // namespace spgptd
