#include "spgptd/blockinv.hpp"

#include <Eigen/Cholesky>
#include <atomic>
#include <string>

namespace spgptd {

namespace {

std::atomic<std::size_t> g_dense_count{0};
std::atomic<std::size_t> g_extend_count{0};
std::atomic<std::size_t> g_rank_one_count{0};

void symmetrize(Eigen::MatrixXd& m) {
  m = 0.5 * (m + m.transpose()).eval();
}

}  // namespace

LinalgOpCounts linalg_op_counts() {
  return {g_dense_count.load(), g_extend_count.load(), g_rank_one_count.load()};
}

void reset_linalg_op_counts() {
  g_dense_count = 0;
  g_extend_count = 0;
  g_rank_one_count = 0;
}

SpdInverse dense_spd_inverse(const Eigen::MatrixXd& K, double jitter) {
  if (K.rows() != K.cols() || K.rows() < 1) {
    throw InvalidShape("dense_spd_inverse: matrix must be square, n >= 1");
  }
  if (jitter < 0.0) {
    throw InvalidArgument("dense_spd_inverse: jitter must be nonnegative");
  }
  g_dense_count.fetch_add(1);

  const Eigen::Index n = K.rows();
  const double mean_diag = K.diagonal().cwiseAbs().mean();
  double current = jitter;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    Eigen::MatrixXd shifted = K;
    shifted.diagonal().array() += current;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      SpdInverse result;
      result.inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
      result.jitter = current;
      symmetrize(result.inv);
      return result;
    }
    current = current > 0.0 ? 10.0 * current : 1e-10 * std::max(mean_diag, 1.0);
  }
  throw NotPositiveDefinite(
      "dense_spd_inverse: factorization failed after jitter escalation");
}

BorderedExtension extend_spd_inverse(const SpdInverse& prev,
                                     const Eigen::VectorXd& border,
                                     double corner,
                                     double degeneracy_threshold) {
  if (border.size() != prev.dim()) {
    throw DimensionMismatch("extend_spd_inverse: border length " +
                            std::to_string(border.size()) +
                            " != inverse dimension " +
                            std::to_string(prev.dim()));
  }
  g_extend_count.fetch_add(1);

  const Eigen::VectorXd g = prev.inv * border;
  const double schur = corner - border.dot(g);
  if (!(schur > degeneracy_threshold)) {
    throw DegenerateBorder(
        "extend_spd_inverse: Schur complement " + std::to_string(schur) +
        " at or below threshold (duplicate or near-duplicate support point)");
  }
  const double inv_corner = 1.0 / schur;

  const Eigen::Index n = prev.dim();
  BorderedExtension ext;
  ext.inverse.jitter = prev.jitter;
  ext.inverse.inv.resize(n + 1, n + 1);
  ext.inverse.inv.topLeftCorner(n, n) =
      prev.inv + inv_corner * g * g.transpose();
  ext.inverse.inv.topRightCorner(n, 1) = -inv_corner * g;
  ext.inverse.inv.bottomLeftCorner(1, n) = -inv_corner * g.transpose();
  ext.inverse.inv(n, n) = inv_corner;
  symmetrize(ext.inverse.inv);
  ext.inv_corner = inv_corner;
  ext.solved_border = g;
  return ext;
}

SpdInverse rank_one_update(const SpdInverse& prev, const Eigen::VectorXd& v,
                           double b, double degeneracy_threshold) {
  if (v.size() != prev.dim()) {
    throw DimensionMismatch("rank_one_update: vector length " +
                            std::to_string(v.size()) +
                            " != inverse dimension " +
                            std::to_string(prev.dim()));
  }
  if (!(b > 0.0)) {
    throw InvalidArgument("rank_one_update: scale b must be positive");
  }
  g_rank_one_count.fetch_add(1);

  const Eigen::VectorXd u = prev.inv * v;
  const double denom = 1.0 + b * v.dot(u);
  if (!(denom > degeneracy_threshold)) {
    throw NumericalDegeneracy("rank_one_update: denominator " +
                              std::to_string(denom) + " at or below threshold");
  }
  SpdInverse result;
  result.jitter = prev.jitter;
  result.inv = prev.inv - (b / denom) * u * u.transpose();
  symmetrize(result.inv);
  return result;
}

}  // namespace spgptd
