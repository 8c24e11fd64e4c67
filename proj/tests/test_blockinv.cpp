#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spgptd/blockinv.hpp"

#include "oracles.hpp"

using namespace spgptd;

TEST_CASE("dense inverse: identity base case") {
  Eigen::MatrixXd k(1, 1);
  k << 1.0;
  const SpdInverse inv = dense_spd_inverse(k, 0.0);
  CHECK(inv.dim() == 1);
  CHECK(inv.inv(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(inv.jitter == 0.0);
}

TEST_CASE("dense inverse: hand-computed 2x2") {
  Eigen::MatrixXd k(2, 2);
  k << 2.0, 1.0, 1.0, 2.0;
  const SpdInverse inv = dense_spd_inverse(k, 0.0);
  Eigen::MatrixXd expected(2, 2);
  expected << 2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0;
  CHECK(testutil::max_norm(inv.inv - expected) < 1e-14);
}

TEST_CASE("dense inverse matches Gauss-Jordan oracle on seeded 10x10") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd k = testutil::random_spd(10, rng);
  const SpdInverse inv = dense_spd_inverse(k, 0.0);
  const Eigen::MatrixXd oracle = testutil::gauss_jordan_inverse(k);
  CHECK(testutil::max_norm(inv.inv - oracle) < 1e-10);
}

TEST_CASE("dense inverse: jitter escalation rescues a singular matrix") {
  Eigen::MatrixXd k(2, 2);
  k << 1.0, 1.0, 1.0, 1.0;  // rank one
  const SpdInverse inv = dense_spd_inverse(k, 0.0);
  CHECK(inv.jitter > 0.0);
  CHECK(inv.inv.allFinite());
}

TEST_CASE("dense inverse: hopeless input throws after escalation") {
  Eigen::MatrixXd k(2, 2);
  k << 0.0, 1.0, 1.0, -5.0;  // indefinite with zero diagonal
  CHECK_THROWS_AS(dense_spd_inverse(k, 0.0), NotPositiveDefinite);
}

TEST_CASE("extend: block-diagonal case") {
  Eigen::MatrixXd k(1, 1);
  k << 1.0;
  const SpdInverse prev = dense_spd_inverse(k, 0.0);
  const BorderedExtension ext =
      extend_spd_inverse(prev, Eigen::VectorXd::Zero(1), 1.0);
  CHECK(testutil::max_norm(ext.inverse.inv -
                           Eigen::MatrixXd::Identity(2, 2)) < 1e-15);
  CHECK(ext.inv_corner == doctest::Approx(1.0));
  CHECK(ext.solved_border.isZero(0.0));
}

TEST_CASE("extend: matches the hand-computed 2x2") {
  Eigen::MatrixXd k(1, 1);
  k << 2.0;
  const SpdInverse prev = dense_spd_inverse(k, 0.0);
  Eigen::VectorXd border(1);
  border << 1.0;
  const BorderedExtension ext = extend_spd_inverse(prev, border, 2.0);
  Eigen::MatrixXd expected(2, 2);
  expected << 2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0;
  CHECK(testutil::max_norm(ext.inverse.inv - expected) < 1e-14);
  // corner of the inverse is the reciprocal Schur complement 1/(2 - 1/2)
  CHECK(ext.inv_corner == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("extend: 15x15 grown from scratch matches dense inversion") {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd k = testutil::random_spd(15, rng);
  SpdInverse grown = dense_spd_inverse(k.topLeftCorner(1, 1), 0.0);
  for (int j = 1; j < 15; ++j) {
    grown = extend_spd_inverse(grown, k.block(0, j, j, 1), k(j, j)).inverse;
  }
  const SpdInverse dense = dense_spd_inverse(k, 0.0);
  CHECK(testutil::max_norm(grown.inv - dense.inv) < 1e-9);
}

TEST_CASE("extend: duplicated column trips DegenerateBorder") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd k = testutil::random_spd(4, rng);
  SpdInverse grown = dense_spd_inverse(k, 0.0);
  // border equal to an existing column with matching corner duplicates
  // support point 2 exactly
  const Eigen::VectorXd border = k.col(2);
  CHECK_THROWS_AS(extend_spd_inverse(grown, border, k(2, 2)),
                  DegenerateBorder);
}

TEST_CASE("rank-one update: zero vector leaves the inverse unchanged") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd k = testutil::random_spd(6, rng);
  const SpdInverse prev = dense_spd_inverse(k, 0.0);
  const SpdInverse next =
      rank_one_update(prev, Eigen::VectorXd::Zero(6), 1.0);
  CHECK(testutil::max_norm(next.inv - prev.inv) == 0.0);
}

TEST_CASE("rank-one update: scalar case (1+1)^-1") {
  Eigen::MatrixXd k(1, 1);
  k << 1.0;
  const SpdInverse prev = dense_spd_inverse(k, 0.0);
  Eigen::VectorXd v(1);
  v << 1.0;
  const SpdInverse next = rank_one_update(prev, v, 1.0);
  CHECK(next.inv(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("rank-one update matches dense recomputation on seeded 8x8") {
  std::mt19937_64 rng(13);
  const Eigen::MatrixXd s = testutil::random_spd(8, rng);
  Eigen::VectorXd v(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 8; ++i) {
    v(i) = normal(rng);
  }
  const double b = 0.7;
  const SpdInverse prev = dense_spd_inverse(s, 0.0);
  const SpdInverse next = rank_one_update(prev, v, b);
  const SpdInverse dense =
      dense_spd_inverse(s + b * v * v.transpose(), 0.0);
  CHECK(testutil::max_norm(next.inv - dense.inv) < 1e-9);
}

TEST_CASE("rank-one update rejects nonpositive scale") {
  Eigen::MatrixXd k(2, 2);
  k << 1.0, 0.0, 0.0, 1.0;
  const SpdInverse prev = dense_spd_inverse(k, 0.0);
  Eigen::VectorXd v(2);
  v << 1.0, 0.0;
  CHECK_THROWS_AS(rank_one_update(prev, v, 0.0), InvalidArgument);
  CHECK_THROWS_AS(rank_one_update(prev, v, -1.0), InvalidArgument);
}

TEST_CASE("property: bordered growth tracks dense inversion, dims 1-20") {
  double worst = 0.0;
  for (int instance = 0; instance < 200; ++instance) {
    std::mt19937_64 rng(100 + instance);
    const int dim = 1 + static_cast<int>(rng() % 20);
    Eigen::MatrixXd k;
    if (instance % 2 == 0) {
      k = testutil::random_spd(dim, rng);
    } else {
      const KernelSpec spec = KernelSpec::isotropic(2, 0.5, 1.0);
      const auto pts = testutil::separated_points(dim, 2, 0.0, 4.0, 0.3, rng);
      k = k_matrix(spec, pts, pts);
      k.diagonal().array() += 1e-6;
    }
    SpdInverse grown = dense_spd_inverse(k.topLeftCorner(1, 1), 0.0);
    for (int j = 1; j < dim; ++j) {
      grown = extend_spd_inverse(grown, k.block(0, j, j, 1), k(j, j)).inverse;
    }
    const SpdInverse dense = dense_spd_inverse(k, 0.0);
    worst = std::max(worst, testutil::max_norm(grown.inv - dense.inv));
    // the inverse actually inverts the tracked matrix
    CHECK(testutil::max_norm(k * grown.inv -
                             Eigen::MatrixXd::Identity(dim, dim)) <= 1e-8);
    // symmetry is enforced, not incidental
    CHECK(testutil::max_norm(grown.inv - grown.inv.transpose()) <=
          1e-12 * (1.0 + testutil::max_norm(grown.inv)));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("operation counters observe what ran") {
  reset_linalg_op_counts();
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd k = testutil::random_spd(3, rng);
  const SpdInverse inv = dense_spd_inverse(k, 0.0);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(3);
  (void)rank_one_update(inv, v, 0.5);
  (void)extend_spd_inverse(inv, 0.1 * v, 5.0);
  const LinalgOpCounts counts = linalg_op_counts();
  CHECK(counts.dense_factorizations == 1);
  CHECK(counts.rank_one_updates == 1);
  CHECK(counts.bordered_extensions == 1);
}
