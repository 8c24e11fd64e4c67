#pragma once

#include <Eigen/Dense>
#include <vector>

#include "spgptd/blockinv.hpp"
#include "spgptd/tdmodel.hpp"

namespace spgptd {

struct PredictiveMoments {
  double mean{0.0};
  double variance{0.0};
};

/// Clamps roundoff-negative variances to zero. Anything below -1e-10 is a
/// genuine posterior inconsistency and throws NumericalDegeneracy.
double clamped_variance(double variance);

/// Ordered free support points for the sparse posterior. Points live in the
/// same space as the inputs. Near-duplicates are rejected by the covariance
/// machinery (DegenerateBorder) whenever the set is used, so the container
/// itself stays thin.
class PseudoInputSet {
 public:
  PseudoInputSet() = default;
  explicit PseudoInputSet(std::vector<StateAction> points)
      : points_(std::move(points)) {}

  const std::vector<StateAction>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  void add(StateAction z) { points_.push_back(std::move(z)); }

 private:
  std::vector<StateAction> points_;
};

/// Input-independent sparse posterior parameters: predictions are
/// mean = k_z(x)^T alpha and variance = k(x,x) - k_z(x)^T P k_z(x).
struct PosteriorParams {
  Eigen::VectorXd alpha;
  Eigen::MatrixXd P;
  PseudoInputSet pseudo;
  KernelSpec spec;
};

/// Exact TD posterior over values, dense in the number of transitions.
/// Factorizes once; queries are O(t^2). This is the reference every sparse
/// result is ultimately judged against.
class ExactGpSarsa {
 public:
  ExactGpSarsa(const TransitionDataset& dataset, const KernelSpec& spec);

  PredictiveMoments predict(const StateAction& x_star) const;

 private:
  TdGram gram_;
  KernelSpec spec_;
  Eigen::LLT<Eigen::MatrixXd> llt_;        // of K_rr + sigma2 * I
  Eigen::VectorXd weights_;                // (K_rr + sigma2 I)^{-1} r
};

PredictiveMoments gp_sarsa_posterior(const TransitionDataset& dataset,
                                     const KernelSpec& spec,
                                     const StateAction& x_star);

/// Inverse of the pseudo Gram, grown one point at a time through the
/// bordered-inverse lemma so a duplicated pseudo input fails as
/// DegenerateBorder instead of being masked by jitter escalation.
SpdInverse pseudo_gram_inverse(const PseudoInputSet& Z, const KernelSpec& spec);

/// Sparse batch posterior by dense recomputation. Every inverse taken here
/// is of pseudo-set rank (or diagonal). Duplicate pseudo inputs surface as
/// DegenerateBorder from the incremental Gram inversion.
PosteriorParams spgp_batch_params(const TransitionDataset& dataset,
                                  const PseudoInputSet& Z,
                                  const KernelSpec& spec);

PredictiveMoments spgp_predict(const PosteriorParams& params,
                               const StateAction& x_star);

/// Reference route for the same posterior, assembled through the
/// regularized cross-Gram M = K_zz + U^T B U and per-query dense solves
/// instead of precomposed parameters. Kept deliberately separate from
/// spgp_batch_params so the two routes cross-check each other.
PredictiveMoments spgp_predict_reference(const TransitionDataset& dataset,
                                         const PseudoInputSet& Z,
                                         const KernelSpec& spec,
                                         const StateAction& x_star);

/// Gaussian evidence of the rewards under the sparse TD model. Constant
/// offsets are irrelevant to refinement; compare differences only.
double log_marginal_likelihood(const TransitionDataset& dataset,
                               const PseudoInputSet& Z,
                               const KernelSpec& spec);

/// Derivative-free pseudo-input refinement: coordinate-wise perturbation
/// with step halving, fixed proposal order, greedy acceptance. The budget
/// counts likelihood evaluations (the evaluation of Z0 included). The
/// returned set never has lower likelihood than Z0; degenerate proposals
/// are discarded.
PseudoInputSet refine_pseudo_inputs(const TransitionDataset& dataset,
                                    const PseudoInputSet& Z0,
                                    const KernelSpec& spec, long budget);

}  // namespace spgptd
