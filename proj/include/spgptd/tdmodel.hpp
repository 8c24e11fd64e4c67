#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "spgptd/kernel.hpp"

namespace spgptd {

/// Band matrix coupling consecutive value evaluations: (t-1) rows over t
/// columns. Row i of a non-terminal transition carries +1 at column i and
/// -gamma at column i+1. A terminal transition keeps only the +1: its
/// reward observes the value directly, and the following input (the first
/// of the next episode) starts an uncoupled column.
class BellmanMatrix {
 public:
  BellmanMatrix(Eigen::Index t, double gamma, std::vector<bool> terminal_rows);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return rows_ + 1; }
  double gamma() const { return gamma_; }
  bool terminal(Eigen::Index row) const { return terminal_[row]; }

  /// Effective discount on row i: 0 on terminal rows, gamma otherwise.
  double row_gamma(Eigen::Index row) const {
    return terminal_[row] ? 0.0 : gamma_;
  }

  /// Left-multiplies M (t x n) by the band matrix without materializing it:
  /// row i of the result is row i of M minus row_gamma(i) * row i+1.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& M) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

  /// Dense materialization, for oracles and inspection.
  Eigen::MatrixXd dense() const;

 private:
  Eigen::Index rows_;
  double gamma_;
  std::vector<bool> terminal_;
};

inline BellmanMatrix build_bellman(Eigen::Index t, double gamma,
                                   std::vector<bool> terminal_rows = {}) {
  return BellmanMatrix(t, gamma, std::move(terminal_rows));
}

/// Ordered trajectory data: inputs x_1..x_t with rewards r_1..r_{t-1}
/// observed on the transitions between consecutive inputs. Terminal flags
/// mark episode-ending transitions; the input that follows a terminal
/// transition is the first input of the next episode.
class TransitionDataset {
 public:
  TransitionDataset(double gamma, double sigma2, StateAction first_input);

  void add_transition(double reward, StateAction next_input, bool terminal);

  Eigen::Index t() const {
    return static_cast<Eigen::Index>(inputs_.size());
  }
  Eigen::Index n_transitions() const {
    return static_cast<Eigen::Index>(rewards_.size());
  }

  const std::vector<StateAction>& inputs() const { return inputs_; }
  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<bool>& terminal() const { return terminal_; }
  double gamma() const { return gamma_; }
  double sigma2() const { return sigma2_; }

  Eigen::VectorXd reward_vector() const;
  BellmanMatrix bellman() const;

  /// One transition per CSV record: input coordinates, reward, terminal flag.
  /// The final record holds the last input with empty reward/terminal
  /// fields. The header row carries the input dimension through its x0..xD
  /// columns. Lines starting with '#' are ignored on read.
  void write_csv(std::ostream& os) const;
  static TransitionDataset read_csv(std::istream& is, double gamma,
                                    double sigma2);

 private:
  std::vector<StateAction> inputs_;
  std::vector<double> rewards_;
  std::vector<bool> terminal_;
  double gamma_;
  double sigma2_;
};

/// TD-transformed Gram machinery for a dataset snapshot: the (t-1)x(t-1)
/// reward-space covariance and the matching query-vector builder.
class TdGram {
 public:
  TdGram(const TransitionDataset& dataset, const KernelSpec& spec);

  const Eigen::MatrixXd& K_rr() const { return K_rr_; }

  /// TD-transformed cross-covariance between the query and the rewards.
  Eigen::VectorXd k_r_star(const StateAction& x_star) const;

 private:
  std::vector<StateAction> inputs_;
  BellmanMatrix H_;
  KernelSpec spec_;
  Eigen::MatrixXd K_rr_;
};

inline TdGram assemble_td_gram(const TransitionDataset& dataset,
                               const KernelSpec& spec) {
  return TdGram(dataset, spec);
}

}  // namespace spgptd
