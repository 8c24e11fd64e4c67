#pragma once

#include <Eigen/Dense>
#include <cstddef>

#include "spgptd/errors.hpp"

namespace spgptd {

/// Maintained inverse of a symmetric positive-definite matrix. The tracked
/// matrix itself is not stored; only its inverse is, kept symmetric by
/// explicit symmetrization after every update.
struct SpdInverse {
  Eigen::MatrixXd inv;
  double jitter{0.0};  // diagonal shift actually used at factorization time

  Eigen::Index dim() const { return inv.rows(); }
};

/// Operation counts for the incremental linear algebra. Used by tests and
/// the benchmark to show that per-transition updates never fall back to a
/// dense factorization.
struct LinalgOpCounts {
  std::size_t dense_factorizations{0};
  std::size_t bordered_extensions{0};
  std::size_t rank_one_updates{0};
};

LinalgOpCounts linalg_op_counts();
void reset_linalg_op_counts();

inline constexpr double kDefaultDegeneracyThreshold = 1e-12;

/// Inverts K + jitter*I through a Cholesky factorization. If the
/// factorization fails the jitter is escalated by 10x (seeded at
/// 1e-10 * mean diagonal when starting from zero) up to three retries;
/// after that NotPositiveDefinite is thrown. The jitter that succeeded is
/// recorded on the result.
SpdInverse dense_spd_inverse(const Eigen::MatrixXd& K, double jitter);

struct BorderedExtension {
  SpdInverse inverse;       // inverse of [[K, border], [border^T, corner]]
  double inv_corner;        // corner entry of the new inverse,
                            // 1 / (corner - border^T * prev.inv * border)
  Eigen::VectorXd solved_border;  // prev.inv * border
};

/// Appends one row/column to the tracked matrix and updates the inverse by
/// the partitioned-inverse identity. inv_corner and solved_border are
/// returned because the posterior recursions reuse both.
/// Throws DegenerateBorder when the Schur complement
/// corner - border^T * prev.inv * border falls at or below the threshold,
/// the signature of a duplicated support point.
BorderedExtension extend_spd_inverse(
    const SpdInverse& prev, const Eigen::VectorXd& border, double corner,
    double degeneracy_threshold = kDefaultDegeneracyThreshold);

/// Given the inverse of S, returns the inverse of S + b*v*v^T (b > 0) via
/// the rank-one inverse-update identity. Growth only; no downdating.
SpdInverse rank_one_update(
    const SpdInverse& prev, const Eigen::VectorXd& v, double b,
    double degeneracy_threshold = kDefaultDegeneracyThreshold);

}  // namespace spgptd
