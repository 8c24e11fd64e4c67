#include "spgptd/batch.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace spgptd {

double clamped_variance(double variance) {
  constexpr double kVarianceTolerance = 1e-10;
  if (variance < -kVarianceTolerance) {
    throw NumericalDegeneracy("predictive variance " +
                              std::to_string(variance) +
                              " below tolerance, posterior is inconsistent");
  }
  return variance < 0.0 ? 0.0 : variance;
}

SpdInverse pseudo_gram_inverse(const PseudoInputSet& Z,
                               const KernelSpec& spec) {
  if (Z.size() < 1) {
    throw InvalidArgument("pseudo_gram_inverse: empty pseudo-input set");
  }
  const auto& pts = Z.points();
  SpdInverse A;
  A.inv = Eigen::MatrixXd::Constant(1, 1, 1.0 / k_eval(spec, pts[0], pts[0]));
  for (std::size_t j = 1; j < pts.size(); ++j) {
    std::vector<StateAction> head(pts.begin(),
                                  pts.begin() + static_cast<long>(j));
    A = extend_spd_inverse(A, k_vector(spec, head, pts[j]),
                           k_eval(spec, pts[j], pts[j]))
            .inverse;
  }
  return A;
}

namespace {

void require_transitions(const TransitionDataset& dataset) {
  if (dataset.t() < 2) {
    throw InvalidShape("need at least one transition (t >= 2)");
  }
}

struct SparseBlocks {
  Eigen::MatrixXd U;        // (t-1) x k, TD-transformed cross covariance
  SpdInverse A;             // inverse of the pseudo Gram
  Eigen::VectorXd b;        // diagonal of B
  Eigen::MatrixXd K_zz;     // pseudo Gram
};

/// Shared assembly of the sparse TD blocks. The noise diagonal entries are
/// 1/b_i = d2_i - u_i^T A u_i + sigma2, with d2_i the TD-differenced kernel
/// scalar of row i.
SparseBlocks assemble_sparse_blocks(const TransitionDataset& dataset,
                                    const PseudoInputSet& Z,
                                    const KernelSpec& spec) {
  require_transitions(dataset);
  if (Z.size() < 1) {
    throw InvalidArgument("pseudo-input set must be nonempty");
  }
  SparseBlocks blocks;
  const BellmanMatrix H = dataset.bellman();
  blocks.U = H.apply(k_matrix(spec, dataset.inputs(), Z.points()));
  blocks.A = pseudo_gram_inverse(Z, spec);
  blocks.K_zz = k_matrix(spec, Z.points(), Z.points());

  const auto& inputs = dataset.inputs();
  const Eigen::Index n = H.rows();
  blocks.b.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d2 = delta2_k(spec, inputs[static_cast<std::size_t>(i)],
                               inputs[static_cast<std::size_t>(i) + 1],
                               H.row_gamma(i));
    const Eigen::VectorXd u = blocks.U.row(i).transpose();
    const double inv_b = d2 - u.dot(blocks.A.inv * u) + dataset.sigma2();
    if (!(inv_b > 0.0)) {
      throw NumericalDegeneracy("non-positive noise diagonal at row " +
                                std::to_string(i));
    }
    blocks.b(i) = 1.0 / inv_b;
  }
  return blocks;
}

}  // namespace

ExactGpSarsa::ExactGpSarsa(const TransitionDataset& dataset,
                           const KernelSpec& spec)
    : gram_(dataset, spec), spec_(spec) {
  require_transitions(dataset);
  Eigen::MatrixXd S = gram_.K_rr();
  S.diagonal().array() += dataset.sigma2();
  llt_.compute(S);
  if (llt_.info() != Eigen::Success) {
    // Regularized TD Gram should always factor; escalate jitter if not.
    const SpdInverse fallback = dense_spd_inverse(S, 0.0);
    S.diagonal().array() += fallback.jitter;
    llt_.compute(S);
    if (llt_.info() != Eigen::Success) {
      throw NotPositiveDefinite("ExactGpSarsa: TD Gram not factorizable");
    }
  }
  weights_ = llt_.solve(dataset.reward_vector());
}

PredictiveMoments ExactGpSarsa::predict(const StateAction& x_star) const {
  const Eigen::VectorXd k_r = gram_.k_r_star(x_star);
  PredictiveMoments out;
  out.mean = k_r.dot(weights_);
  out.variance = clamped_variance(k_eval(spec_, x_star, x_star) -
                                k_r.dot(llt_.solve(k_r)));
  return out;
}

PredictiveMoments gp_sarsa_posterior(const TransitionDataset& dataset,
                                     const KernelSpec& spec,
                                     const StateAction& x_star) {
  return ExactGpSarsa(dataset, spec).predict(x_star);
}

PosteriorParams spgp_batch_params(const TransitionDataset& dataset,
                                  const PseudoInputSet& Z,
                                  const KernelSpec& spec) {
  const SparseBlocks blocks = assemble_sparse_blocks(dataset, Z, spec);

  // C = (K_zz + U^T B U)^{-1}, still a pseudo-set-rank inversion.
  const Eigen::MatrixXd C_inv_matrix =
      blocks.K_zz + blocks.U.transpose() * blocks.b.asDiagonal() * blocks.U;
  const SpdInverse C = dense_spd_inverse(C_inv_matrix, 0.0);

  PosteriorParams params;
  params.alpha = C.inv * (blocks.U.transpose() *
                          (blocks.b.asDiagonal() * dataset.reward_vector()));
  params.P = blocks.A.inv - C.inv;
  params.P = 0.5 * (params.P + params.P.transpose()).eval();
  params.pseudo = Z;
  params.spec = spec;
  return params;
}

PredictiveMoments spgp_predict(const PosteriorParams& params,
                               const StateAction& x_star) {
  const Eigen::VectorXd k_z = k_vector(params.spec, params.pseudo.points(),
                                       x_star);
  PredictiveMoments out;
  out.mean = k_z.dot(params.alpha);
  out.variance = clamped_variance(k_eval(params.spec, x_star, x_star) -
                                k_z.dot(params.P * k_z));
  return out;
}

PredictiveMoments spgp_predict_reference(const TransitionDataset& dataset,
                                         const PseudoInputSet& Z,
                                         const KernelSpec& spec,
                                         const StateAction& x_star) {
  const SparseBlocks blocks = assemble_sparse_blocks(dataset, Z, spec);

  const Eigen::MatrixXd M =
      blocks.K_zz + blocks.U.transpose() * blocks.b.asDiagonal() * blocks.U;
  const Eigen::LLT<Eigen::MatrixXd> M_llt(M);
  const Eigen::LLT<Eigen::MatrixXd> K_llt(blocks.K_zz);
  if (M_llt.info() != Eigen::Success || K_llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("spgp_predict_reference: factorization failed");
  }

  const Eigen::VectorXd k_z = k_vector(spec, Z.points(), x_star);
  const Eigen::VectorXd moment =
      blocks.U.transpose() * (blocks.b.asDiagonal() * dataset.reward_vector());

  PredictiveMoments out;
  out.mean = k_z.dot(M_llt.solve(moment));
  out.variance = clamped_variance(
      k_eval(spec, x_star, x_star) -
      k_z.dot(K_llt.solve(k_z) - M_llt.solve(k_z)));
  return out;
}

double log_marginal_likelihood(const TransitionDataset& dataset,
                               const PseudoInputSet& Z,
                               const KernelSpec& spec) {
  const SparseBlocks blocks = assemble_sparse_blocks(dataset, Z, spec);
  const Eigen::VectorXd r = dataset.reward_vector();

  const Eigen::MatrixXd C_inv_matrix =
      blocks.K_zz + blocks.U.transpose() * blocks.b.asDiagonal() * blocks.U;
  const Eigen::LLT<Eigen::MatrixXd> C_inv_llt(C_inv_matrix);
  const Eigen::LLT<Eigen::MatrixXd> K_llt(blocks.K_zz);
  if (C_inv_llt.info() != Eigen::Success || K_llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("log_marginal_likelihood: factorization failed");
  }

  auto log_det_from_llt = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };

  // Woodbury and the determinant lemma, so the dense (t-1)-sized marginal
  // covariance never needs to be formed.
  const double log_det = log_det_from_llt(C_inv_llt) - log_det_from_llt(K_llt) -
                         blocks.b.array().log().sum();
  const Eigen::VectorXd moment =
      blocks.U.transpose() * (blocks.b.asDiagonal() * r);
  const double quad = r.dot(blocks.b.asDiagonal() * r) -
                      moment.dot(C_inv_llt.solve(moment));

  const double n = static_cast<double>(blocks.b.size());
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + log_det + quad);
}

PseudoInputSet refine_pseudo_inputs(const TransitionDataset& dataset,
                                    const PseudoInputSet& Z0,
                                    const KernelSpec& spec, long budget) {
  if (budget < 1) {
    throw InvalidArgument("refine_pseudo_inputs: budget must be >= 1");
  }
  constexpr double kInitialStepScale = 0.5;
  constexpr double kMinStepScale = 1e-4;

  PseudoInputSet best = Z0;
  double best_ll = log_marginal_likelihood(dataset, best, spec);
  long evals = 1;

  double step_scale = kInitialStepScale;
  while (evals < budget && step_scale >= kMinStepScale) {
    bool improved = false;
    for (std::size_t j = 0; j < best.size() && evals < budget; ++j) {
      for (Eigen::Index d = 0; d < spec.lengthscales.size() && evals < budget;
           ++d) {
        for (const double sign : {+1.0, -1.0}) {
          if (evals >= budget) {
            break;
          }
          std::vector<StateAction> proposal = best.points();
          Eigen::VectorXd coords = proposal[j].coords();
          coords(d) += sign * step_scale * spec.lengthscales(d);
          proposal[j] = StateAction(coords);
          ++evals;
          double ll;
          try {
            ll = log_marginal_likelihood(dataset, PseudoInputSet(proposal),
                                         spec);
          } catch (const DegenerateBorder&) {
            continue;  // proposal collided with another support point
          } catch (const NumericalDegeneracy&) {
            continue;  // near-collision poisoned the noise diagonal
          }
          if (ll > best_ll) {
            best = PseudoInputSet(std::move(proposal));
            best_ll = ll;
            improved = true;
          }
        }
      }
    }
    if (!improved) {
      step_scale *= 0.5;
    }
  }
  return best;
}

}  // namespace spgptd
