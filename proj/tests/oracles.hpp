// Test-only oracles, deliberately independent of the library's numerical
// paths: a textbook Gauss-Jordan inversion and helpers for dense
// reference computations.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "spgptd/kernel.hpp"

namespace testutil {

/// Gauss-Jordan elimination with partial pivoting; no Cholesky, no Eigen
/// decompositions, so it cannot share a failure mode with the library.
inline Eigen::MatrixXd gauss_jordan_inverse(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index row = col + 1; row < n; ++row) {
      if (std::abs(a(row, col)) > std::abs(a(pivot, col))) {
        pivot = row;
      }
    }
    if (a(pivot, col) == 0.0) {
      throw std::runtime_error("gauss_jordan_inverse: singular matrix");
    }
    a.row(col).swap(a.row(pivot));
    inv.row(col).swap(inv.row(pivot));
    const double scale = a(col, col);
    a.row(col) /= scale;
    inv.row(col) /= scale;
    for (Eigen::Index row = 0; row < n; ++row) {
      if (row != col && a(row, col) != 0.0) {
        const double factor = a(row, col);
        a.row(row) -= factor * a.row(col);
        inv.row(row) -= factor * inv.row(col);
      }
    }
  }
  return inv;
}

inline Eigen::MatrixXd random_spd(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      m(i, j) = normal(rng);
    }
  }
  Eigen::MatrixXd k = m * m.transpose();
  k.diagonal().array() += static_cast<double>(dim);
  return 0.5 * (k + k.transpose());
}

inline spgptd::StateAction random_point(int dim, double lo, double hi,
                                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(lo, hi);
  Eigen::VectorXd c(dim);
  for (int d = 0; d < dim; ++d) {
    c(d) = uniform(rng);
  }
  return spgptd::StateAction(c);
}

inline std::vector<spgptd::StateAction> separated_points(
    int count, int dim, double lo, double hi, double min_dist,
    std::mt19937_64& rng) {
  std::vector<spgptd::StateAction> points;
  int attempts = 0;
  int since_last_success = 0;
  while (static_cast<int>(points.size()) < count) {
    if (++attempts > 200000) {
      throw std::runtime_error("separated_points: sampling stalled");
    }
    if (++since_last_success > 2000) {
      points.clear();  // dead-end placement, start over
      since_last_success = 0;
    }
    const auto p = random_point(dim, lo, hi, rng);
    bool ok = true;
    for (const auto& q : points) {
      if ((q.coords() - p.coords()).norm() < min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) {
      points.push_back(p);
      since_last_success = 0;
    }
  }
  return points;
}

inline double max_norm(const Eigen::MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace testutil
