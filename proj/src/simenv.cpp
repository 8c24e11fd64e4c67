#include "spgptd/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace spgptd {

void MdpSpec::validate() const {
  if (n_states < 2) {
    throw InvalidArgument("MdpSpec: n_states must be >= 2");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw InvalidDiscount("MdpSpec: gamma must lie in [0, 1)");
  }
  if (actions.empty()) {
    throw EmptyActionSet("MdpSpec: action set must be nonempty");
  }
  if (kind == MdpKind::chain && actions.size() != 2) {
    throw InvalidArgument("MdpSpec: chain needs exactly two actions");
  }
}

StateAction MdpSpec::encode(double state, int action_index) const {
  if (action_index < 0 ||
      action_index >= static_cast<int>(actions.size())) {
    throw InvalidAction("MdpSpec::encode: action index out of range");
  }
  return StateAction(
      {state, actions[static_cast<std::size_t>(action_index)]});
}

StepResult step(const MdpSpec& mdp, double state, int action_index,
                std::mt19937_64& rng) {
  (void)rng;  // both environments are deterministic given the action
  if (action_index < 0 ||
      action_index >= static_cast<int>(mdp.actions.size())) {
    throw InvalidAction("step: action index out of range");
  }
  switch (mdp.kind) {
    case MdpKind::chain: {
      const int s = static_cast<int>(state);
      if (action_index == 1) {  // right
        if (s >= mdp.n_states - 1) {
          return {static_cast<double>(mdp.n_states - 1), mdp.goal_reward,
                  true};
        }
        return {static_cast<double>(s + 1), mdp.step_reward, false};
      }
      return {static_cast<double>(std::max(s - 1, 0)), mdp.step_reward,
              false};
    }
    case MdpKind::toy1d: {
      const double drift = mdp.actions[static_cast<std::size_t>(action_index)];
      const double next = std::clamp(state + drift, 0.0, 1.0);
      return {next, -std::abs(next - kToy1dTarget), false};
    }
  }
  throw InvalidArgument("step: unknown MDP kind");
}

int epsilon_greedy(
    const std::function<PredictiveMoments(const StateAction&)>& predictor,
    const MdpSpec& mdp, double state, double epsilon, std::mt19937_64& rng) {
  if (mdp.actions.empty()) {
    throw EmptyActionSet("epsilon_greedy: empty action set");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw InvalidArgument("epsilon_greedy: epsilon must lie in [0, 1]");
  }
  const int n_actions = static_cast<int>(mdp.actions.size());
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<int> pick(0, n_actions - 1);
      return pick(rng);
    }
  }
  int best = 0;
  double best_mean = predictor(mdp.encode(state, 0)).mean;
  for (int a = 1; a < n_actions; ++a) {
    const double mean = predictor(mdp.encode(state, a)).mean;
    if (mean > best_mean) {
      best = a;
      best_mean = mean;
    }
  }
  return best;
}

FixedPolicy make_policy(const std::string& descriptor) {
  FixedPolicy policy;
  policy.descriptor = descriptor;
  if (descriptor == "right" || descriptor == "left") {
    const int index = descriptor == "right" ? 1 : 0;
    policy.sample = [index](const MdpSpec&, double, std::mt19937_64&) {
      return index;
    };
    policy.probs = [index](const MdpSpec& mdp, int) {
      Eigen::VectorXd p = Eigen::VectorXd::Zero(
          static_cast<Eigen::Index>(mdp.actions.size()));
      p(index) = 1.0;
      return p;
    };
    return policy;
  }
  if (descriptor == "random") {
    policy.sample = [](const MdpSpec& mdp, double, std::mt19937_64& rng) {
      std::uniform_int_distribution<int> pick(
          0, static_cast<int>(mdp.actions.size()) - 1);
      return pick(rng);
    };
    policy.probs = [](const MdpSpec& mdp, int) {
      const auto m = static_cast<Eigen::Index>(mdp.actions.size());
      return Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m))
          .eval();
    };
    return policy;
  }
  throw InvalidArgument("make_policy: unknown policy '" + descriptor + "'");
}

void EpisodeLog::write_csv(std::ostream& os) const {
  if (transitions.empty()) {
    return;
  }
  const Eigen::Index dim = transitions.front().x.dim();
  for (Eigen::Index d = 0; d < dim; ++d) {
    os << 'x' << d << ',';
  }
  os << "reward,terminal\n";
  os.precision(17);
  for (const auto& tr : transitions) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      os << tr.x.coords()(d) << ',';
    }
    os << tr.reward << ',' << (tr.terminal ? 1 : 0) << '\n';
  }
  const auto& last = transitions.back().x_next;
  for (Eigen::Index d = 0; d < dim; ++d) {
    os << last.coords()(d) << ',';
  }
  os << ",\n";
}

void RecursiveEstimator::begin(const StateAction& x_first) {
  state_ = RecursiveState::init(params_.kernel, params_.gamma, params_.sigma2,
                                pseudo_, x_first);
}

void RecursiveEstimator::add(double reward, const StateAction& x_next,
                             bool terminal) {
  state_->add_transition(reward, x_next, terminal);
}

PredictiveMoments RecursiveEstimator::predict(const StateAction& x) const {
  return state_->predict(x);
}

void BatchEstimator::begin(const StateAction& x_first) {
  dataset_.emplace(params_.gamma, params_.sigma2, x_first);
  cache_.reset();
}

void BatchEstimator::add(double reward, const StateAction& x_next,
                         bool terminal) {
  dataset_->add_transition(reward, x_next, terminal);
  cache_.reset();
}

PredictiveMoments BatchEstimator::predict(const StateAction& x) const {
  if (!dataset_ || dataset_->n_transitions() == 0) {
    return {0.0, k_eval(params_.kernel, x, x)};
  }
  if (!cache_) {
    cache_ = spgp_batch_params(*dataset_, pseudo_, params_.kernel);
  }
  return spgp_predict(*cache_, x);
}

namespace {

struct Start {
  double state;
  int action;
};

Start episode_start(const MdpSpec& mdp, int episode, std::mt19937_64& rng,
                    const FixedPolicy& policy) {
  if (mdp.finite()) {
    // Exploring starts: cycle through every state/action pair so each one
    // receives on-policy data.
    const int m = static_cast<int>(mdp.actions.size());
    const int pair = episode % (mdp.n_states * m);
    return {static_cast<double>(pair / m), pair % m};
  }
  const double s0 = kToy1dTarget;
  return {s0, policy.sample(mdp, s0, rng)};
}

}  // namespace

PolicyEvaluationResult run_policy_evaluation(const MdpSpec& mdp,
                                             const FixedPolicy& policy,
                                             ValueEstimator& estimator,
                                             int episodes, std::uint64_t seed,
                                             int max_episode_steps) {
  mdp.validate();
  if (episodes < 1) {
    throw InvalidArgument("run_policy_evaluation: episodes must be >= 1");
  }
  std::mt19937_64 rng(seed);

  PolicyEvaluationResult result;
  Start start = episode_start(mdp, 0, rng, policy);
  estimator.begin(mdp.encode(start.state, start.action));

  for (int e = 0; e < episodes; ++e) {
    EpisodeLog log;
    log.seed = seed;
    log.policy = policy.descriptor;
    double s = start.state;
    int a = start.action;
    for (int step_count = 0; step_count < max_episode_steps; ++step_count) {
      const StateAction x_current = mdp.encode(s, a);
      const StepResult res = step(mdp, s, a, rng);
      const bool closes = res.terminal || step_count == max_episode_steps - 1;
      StateAction x_next;
      if (closes) {
        start = episode_start(mdp, e + 1, rng, policy);
        x_next = mdp.encode(start.state, start.action);
      } else {
        const int a_next = policy.sample(mdp, res.next_state, rng);
        x_next = mdp.encode(res.next_state, a_next);
        s = res.next_state;
        a = a_next;
      }
      estimator.add(res.reward, x_next, closes);
      log.transitions.push_back({x_current, res.reward, x_next, closes});
      if (closes) {
        break;
      }
    }
    result.episodes.push_back(std::move(log));
  }

  if (mdp.finite()) {
    for (int st = 0; st < mdp.n_states; ++st) {
      for (int a = 0; a < static_cast<int>(mdp.actions.size()); ++a) {
        const PredictiveMoments m =
            estimator.predict(mdp.encode(static_cast<double>(st), a));
        result.value_table.push_back(
            {static_cast<double>(st), a, m.mean, m.variance});
      }
    }
  } else {
    constexpr int kGrid = 51;
    for (int i = 0; i < kGrid; ++i) {
      const double st = static_cast<double>(i) / (kGrid - 1);
      for (int a = 0; a < static_cast<int>(mdp.actions.size()); ++a) {
        const PredictiveMoments m = estimator.predict(mdp.encode(st, a));
        result.value_table.push_back({st, a, m.mean, m.variance});
      }
    }
  }
  return result;
}

Eigen::MatrixXd dp_value_oracle(const MdpSpec& mdp,
                                const FixedPolicy& policy) {
  mdp.validate();
  if (!mdp.finite()) {
    throw InvalidArgument("dp_value_oracle: finite MDPs only");
  }
  const int n = mdp.n_states;
  const int m = static_cast<int>(mdp.actions.size());
  const int dim = n * m;
  std::mt19937_64 rng(0);  // unused: chain transitions are deterministic

  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd rewards(dim);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < m; ++a) {
      const int row = s * m + a;
      const StepResult res = step(mdp, static_cast<double>(s), a, rng);
      rewards(row) = res.reward;
      if (!res.terminal) {
        const int s_next = static_cast<int>(res.next_state);
        const Eigen::VectorXd p = policy.probs(mdp, s_next);
        for (int a_next = 0; a_next < m; ++a_next) {
          system(row, s_next * m + a_next) -= mdp.gamma * p(a_next);
        }
      }
    }
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) {
    throw NotFinite("dp_value_oracle: Bellman system is singular");
  }
  const Eigen::VectorXd q = lu.solve(rewards);

  Eigen::MatrixXd table(n, m);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < m; ++a) {
      table(s, a) = q(s * m + a);
    }
  }
  return table;
}

}  // namespace spgptd
