#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "spgptd/batch.hpp"
#include "spgptd/blockinv.hpp"
#include "spgptd/tdmodel.hpp"

namespace spgptd {

/// Incrementally maintained sparse TD posterior. Holds the pseudo-Gram
/// inverse A, the regularized cross-Gram inverse C, the noise diagonal b,
/// the TD-transformed cross covariance W (one column per transition), the
/// accumulated F = W diag(b) W^T, the running reward moment rho = W diag(b) r,
/// and the posterior parameters alpha = C rho and P = A - C.
///
/// Per-transition updates touch only pseudo-set-sized blocks (a rank-one
/// inverse update plus kernel evaluations); no factorization of
/// transition-count dimension ever happens. Adding a pseudo input extends
/// A and C through the bordered-inverse lemma and then reconciles the
/// noise diagonal, whose entries all shrink when the new point explains
/// part of each transition, through a chain of rank-one updates.
///
/// Updates mutate the state under a strong exception guarantee: all
/// failable computation happens before the first write, so a throwing
/// update leaves the state untouched. A state is single-writer; copies are
/// independent snapshots and may serve predictions concurrently.
class RecursiveState {
 public:
  static RecursiveState init(KernelSpec spec, double gamma, double sigma2,
                             const PseudoInputSet& pseudo, StateAction x1);

  void add_transition(double reward, const StateAction& x_new, bool terminal);
  void add_pseudo_input(const StateAction& z_new);
  void add_both(double reward, const StateAction& x_new, bool terminal,
                const StateAction& z_new);

  PredictiveMoments predict(const StateAction& x_star) const;

  /// Capacity hint for long runs; avoids reallocation spikes in the
  /// per-transition path.
  void reserve(std::size_t expected_transitions);

  Eigen::Index t() const { return static_cast<Eigen::Index>(inputs_.size()); }
  Eigen::Index k() const {
    return static_cast<Eigen::Index>(pseudo_.size());
  }
  Eigen::Index n_transitions() const {
    return static_cast<Eigen::Index>(rewards_.size());
  }

  const Eigen::VectorXd& alpha() const { return alpha_; }
  const Eigen::MatrixXd& P() const { return P_; }
  const SpdInverse& A() const { return A_; }
  const SpdInverse& C() const { return C_; }
  const std::vector<double>& b() const { return b_; }
  const Eigen::MatrixXd& F() const { return F_; }
  const Eigen::VectorXd& rho() const { return rho_; }
  const PseudoInputSet& pseudo() const { return pseudo_; }
  const std::vector<StateAction>& inputs() const { return inputs_; }
  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<bool>& terminal_flags() const { return terminal_; }
  const StateAction& last_input() const { return inputs_.back(); }
  const KernelSpec& spec() const { return spec_; }
  double gamma() const { return gamma_; }
  double sigma2() const { return sigma2_; }

  /// Column i is the TD-transformed cross covariance of transition i
  /// against the pseudo set.
  const std::vector<Eigen::VectorXd>& W_columns() const { return W_cols_; }

  /// Snapshot of the stored trajectory as a dataset (for batch
  /// recomputation and cross-checks).
  TransitionDataset to_dataset() const;

  /// Field-tagged textual checkpoint; round-trips predictions bit-exactly.
  void save(std::ostream& os) const;
  static RecursiveState load(std::istream& is);

 private:
  RecursiveState() = default;

  struct TransitionPlan;
  struct PseudoPlan;
  TransitionPlan plan_transition(double reward, const StateAction& x_new,
                                 bool terminal) const;
  void commit_transition(TransitionPlan&& plan);
  PseudoPlan plan_pseudo(const StateAction& z_new,
                         const TransitionPlan* pending) const;
  void commit_pseudo(PseudoPlan&& plan);
  void refresh_posterior_params();

  KernelSpec spec_;
  double gamma_{0.0};
  double sigma2_{0.0};

  std::vector<StateAction> inputs_;
  std::vector<double> rewards_;
  std::vector<bool> terminal_;
  PseudoInputSet pseudo_;

  SpdInverse A_;
  SpdInverse C_;
  std::vector<double> b_;
  std::vector<Eigen::VectorXd> W_cols_;
  Eigen::MatrixXd F_;
  Eigen::VectorXd rho_;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd P_;
};

}  // namespace spgptd
