#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spgptd/recursive.hpp"

#include <sstream>

#include "oracles.hpp"

using namespace spgptd;

namespace {

const KernelSpec unit_spec = KernelSpec::isotropic(1, 1.0, 1.0);

double max_norm(const Eigen::MatrixXd& m) { return testutil::max_norm(m); }

/// Relative disagreement of a recursive state with the batch recomputation
/// on its own trajectory: parameters plus a handful of query predictions.
double batch_disagreement(const RecursiveState& state, std::mt19937_64& rng,
                          int n_queries = 5) {
  const PosteriorParams params =
      spgp_batch_params(state.to_dataset(), state.pseudo(), state.spec());
  double err = max_norm(state.alpha() - params.alpha) /
               (1.0 + max_norm(params.alpha));
  err = std::max(err,
                 max_norm(state.P() - params.P) / (1.0 + max_norm(params.P)));
  const int dim = static_cast<int>(state.spec().lengthscales.size());
  for (int q = 0; q < n_queries; ++q) {
    const StateAction x = testutil::random_point(dim, -0.5, 3.5, rng);
    const auto rec = state.predict(x);
    const auto ref = spgp_predict(params, x);
    err = std::max(err, std::abs(rec.mean - ref.mean) /
                            (1.0 + std::abs(ref.mean)));
    err = std::max(err, std::abs(rec.variance - ref.variance) /
                            (1.0 + std::abs(ref.variance)));
  }
  return err;
}

void check_internal_invariants(const RecursiveState& state) {
  const Eigen::VectorXd alpha_from_rho = state.C().inv * state.rho();
  CHECK(max_norm(state.alpha() - alpha_from_rho) <=
        1e-9 * (1.0 + max_norm(alpha_from_rho)));
  CHECK(max_norm(state.P() - (state.A().inv - state.C().inv)) <=
        1e-9 * (1.0 + max_norm(state.P())));
  CHECK(max_norm(state.F() - state.F().transpose()) <=
        1e-10 * (1.0 + max_norm(state.F())));
  for (const double b : state.b()) {
    CHECK(b > 0.0);
  }
}

bool states_equal(const RecursiveState& a, const RecursiveState& b) {
  if (a.t() != b.t() || a.k() != b.k()) {
    return false;
  }
  if (a.alpha() != b.alpha() || a.rho() != b.rho() || a.b() != b.b()) {
    return false;
  }
  if (a.P() != b.P() || a.F() != b.F() || a.A().inv != b.A().inv ||
      a.C().inv != b.C().inv) {
    return false;
  }
  for (Eigen::Index i = 0; i < a.t(); ++i) {
    if (!(a.inputs()[static_cast<std::size_t>(i)] ==
          b.inputs()[static_cast<std::size_t>(i)])) {
      return false;
    }
  }
  return a.rewards() == b.rewards();
}

RecursiveState seeded_run(std::uint64_t seed, int n_transitions, int n_pseudo,
                          double gamma = 0.9, double sigma2 = 0.05) {
  std::mt19937_64 rng(seed);
  const auto pseudo =
      testutil::separated_points(n_pseudo, 1, 0.0, 6.0, 0.7, rng);
  const StateAction x = testutil::random_point(1, 0.0, 6.0, rng);
  RecursiveState state = RecursiveState::init(
      unit_spec, gamma, sigma2, PseudoInputSet(pseudo), x);
  std::normal_distribution<double> reward(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int i = 0; i < n_transitions; ++i) {
    state.add_transition(reward(rng),
                         testutil::random_point(1, 0.0, 6.0, rng),
                         uniform(rng) < 0.1);
  }
  return state;
}

}  // namespace

TEST_CASE("init: single pseudo input gives the textbook base case") {
  const StateAction z({0.5});
  const RecursiveState state = RecursiveState::init(
      unit_spec, 0.9, 0.1, PseudoInputSet({z}), StateAction({0.0}));
  CHECK(state.A().inv(0, 0) == doctest::Approx(1.0));  // 1 / signal variance
  CHECK(state.alpha()(0) == 0.0);
  CHECK(state.P()(0, 0) == 0.0);
  CHECK(state.t() == 1);
  CHECK(state.n_transitions() == 0);
}

TEST_CASE("init: immediate prediction is the prior") {
  std::mt19937_64 rng(103);
  const auto pseudo = testutil::separated_points(4, 1, 0.0, 6.0, 0.7, rng);
  const RecursiveState state =
      RecursiveState::init(unit_spec, 0.9, 0.1, PseudoInputSet(pseudo),
                           StateAction({1.0}));
  const StateAction q = testutil::random_point(1, 0.0, 6.0, rng);
  const auto m = state.predict(q);
  CHECK(m.mean == 0.0);
  CHECK(m.variance == doctest::Approx(k_eval(unit_spec, q, q)));
}

TEST_CASE("init rejects duplicate pseudo inputs") {
  const StateAction z({0.5});
  CHECK_THROWS_AS(RecursiveState::init(unit_spec, 0.9, 0.1,
                                       PseudoInputSet({z, z}),
                                       StateAction({0.0})),
                  DegenerateBorder);
}

TEST_CASE("add_transition: zero reward leaves alpha at zero, moves P") {
  const StateAction z({0.5});
  RecursiveState state = RecursiveState::init(
      unit_spec, 0.9, 0.1, PseudoInputSet({z}), StateAction({0.0}));
  const Eigen::MatrixXd p_before = state.P();
  state.add_transition(0.0, StateAction({1.0}), false);
  CHECK(state.alpha()(0) == 0.0);
  CHECK(max_norm(state.P() - p_before) > 0.0);
  check_internal_invariants(state);
}

TEST_CASE("add_transition: seeded scalar instance matches batch and algebra") {
  // gamma = 0, one pseudo input placed exactly at the first input,
  // sigma2 = 1, one unit reward: alpha collapses to 1 / (1 + s_f^2) = 0.5.
  const StateAction x0({0.7});
  RecursiveState state = RecursiveState::init(
      unit_spec, 0.0, 1.0, PseudoInputSet({x0}), x0);
  state.add_transition(1.0, StateAction({2.5}), false);
  CHECK(state.alpha()(0) == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937_64 rng(104);
  CHECK(batch_disagreement(state, rng) <= 1e-12);
}

TEST_CASE("add_transition: 30 sequential updates match the batch oracle") {
  const RecursiveState state = seeded_run(105, 30, 5);
  std::mt19937_64 rng(106);
  CHECK(batch_disagreement(state, rng, 10) <= 1e-8);
  check_internal_invariants(state);
}

TEST_CASE("add_transition keeps the noise diagonal equal to the dense one") {
  const RecursiveState state = seeded_run(107, 25, 4);
  const TransitionDataset data = state.to_dataset();
  const Eigen::MatrixXd k_tz =
      k_matrix(unit_spec, data.inputs(), state.pseudo().points());
  const Eigen::MatrixXd u = data.bellman().apply(k_tz);
  const Eigen::MatrixXd k_zz = k_matrix(unit_spec, state.pseudo().points(),
                                        state.pseudo().points());
  const Eigen::MatrixXd a = k_zz.inverse();
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double d2 =
        delta2_k(unit_spec, data.inputs()[static_cast<std::size_t>(i)],
                 data.inputs()[static_cast<std::size_t>(i) + 1],
                 data.bellman().row_gamma(i));
    const double inv_b =
        d2 - u.row(i).dot((a * u.row(i).transpose()).eval()) + data.sigma2();
    CHECK(std::abs(1.0 / state.b()[static_cast<std::size_t>(i)] - inv_b) <=
          1e-9 * (1.0 + std::abs(inv_b)));
  }
}

TEST_CASE("add_pseudo_input: duplicate rejected and the state is untouched") {
  RecursiveState state = seeded_run(109, 10, 3);
  const RecursiveState before = state;
  CHECK_THROWS_AS(state.add_pseudo_input(state.pseudo().points()[1]),
                  DegenerateBorder);
  CHECK(states_equal(state, before));
}

TEST_CASE("add_pseudo_input: zero rewards extend alpha with zeros") {
  std::mt19937_64 rng(111);
  const auto pseudo = testutil::separated_points(3, 1, 0.0, 6.0, 0.7, rng);
  RecursiveState state =
      RecursiveState::init(unit_spec, 0.9, 0.1,
                           PseudoInputSet({pseudo[0], pseudo[1]}),
                           StateAction({0.1}));
  for (int i = 0; i < 6; ++i) {
    state.add_transition(0.0, testutil::random_point(1, 0.0, 6.0, rng),
                         false);
  }
  state.add_pseudo_input(pseudo[2]);
  CHECK(state.alpha().cwiseAbs().maxCoeff() <= 1e-12);
  check_internal_invariants(state);
}

TEST_CASE("add_pseudo_input: growing the support tracks batch at every step") {
  std::mt19937_64 rng(113);
  const auto pool = testutil::separated_points(6, 1, 0.0, 6.0, 0.7, rng);
  std::normal_distribution<double> reward(0.0, 1.0);
  RecursiveState state = RecursiveState::init(
      unit_spec, 0.9, 0.05, PseudoInputSet({pool[0]}),
      testutil::random_point(1, 0.0, 6.0, rng));
  for (int i = 0; i < 20; ++i) {
    state.add_transition(reward(rng),
                         testutil::random_point(1, 0.0, 6.0, rng),
                         i % 7 == 6);
  }
  for (std::size_t j = 1; j < pool.size(); ++j) {
    state.add_pseudo_input(pool[j]);
    CHECK(state.k() == static_cast<Eigen::Index>(j + 1));
    std::mt19937_64 qrng(113 + j);
    CHECK(batch_disagreement(state, qrng) <= 1e-8);
    check_internal_invariants(state);
  }
}

TEST_CASE("add_both: equals the two-step composition") {
  std::mt19937_64 rng(127);
  RecursiveState combined = seeded_run(117, 12, 3);
  RecursiveState stepwise = combined;

  const StateAction x_new = testutil::random_point(1, 0.0, 6.0, rng);
  const StateAction z_new({2.77});
  combined.add_both(0.4, x_new, false, z_new);
  stepwise.add_transition(0.4, x_new, false);
  stepwise.add_pseudo_input(z_new);

  CHECK(max_norm(combined.alpha() - stepwise.alpha()) <= 1e-9);
  CHECK(max_norm(combined.P() - stepwise.P()) <= 1e-9);
  CHECK(max_norm(combined.C().inv - stepwise.C().inv) <= 1e-9);
  CHECK(max_norm(combined.F() - stepwise.F()) <= 1e-9);
  REQUIRE(combined.b().size() == stepwise.b().size());
  for (std::size_t i = 0; i < combined.b().size(); ++i) {
    CHECK(combined.b()[i] == doctest::Approx(stepwise.b()[i]).epsilon(1e-12));
  }
}

TEST_CASE("add_both: duplicate pseudo input fails atomically") {
  RecursiveState state = seeded_run(119, 8, 3);
  const RecursiveState before = state;
  CHECK_THROWS_AS(state.add_both(1.0, StateAction({0.3}), false,
                                 state.pseudo().points()[0]),
                  DegenerateBorder);
  CHECK(states_equal(state, before));
}

TEST_CASE("add_both: interleaved run matches batch at the end") {
  std::mt19937_64 rng(131);
  const auto pool = testutil::separated_points(8, 1, 0.0, 9.0, 0.7, rng);
  std::normal_distribution<double> reward(0.0, 1.0);
  RecursiveState state = RecursiveState::init(
      unit_spec, 0.9, 0.05,
      PseudoInputSet(std::vector<StateAction>(pool.begin(), pool.begin() + 2)),
      testutil::random_point(1, 0.0, 6.0, rng));
  std::size_t next = 2;
  for (int i = 1; i <= 30; ++i) {
    const StateAction x_next = testutil::random_point(1, 0.0, 6.0, rng);
    if (i % 10 == 0 && next < pool.size()) {
      state.add_both(reward(rng), x_next, false, pool[next++]);
    } else {
      state.add_transition(reward(rng), x_next, i % 9 == 8);
    }
  }
  std::mt19937_64 qrng(132);
  CHECK(batch_disagreement(state, qrng, 10) <= 1e-8);
  check_internal_invariants(state);
}

TEST_CASE("predict: far query reverts to the prior variance") {
  const RecursiveState state = seeded_run(137, 15, 4);
  const auto far = state.predict(StateAction({40.0}));
  CHECK(std::abs(far.variance - 1.0) < 1e-10);
  CHECK(std::abs(far.mean) < 1e-10);
}

TEST_CASE("per-transition updates never touch a dense factorization") {
  std::mt19937_64 rng(139);
  RecursiveState state = seeded_run(141, 1, 6);
  reset_linalg_op_counts();
  std::normal_distribution<double> reward(0.0, 1.0);
  for (int i = 0; i < 25; ++i) {
    state.add_transition(reward(rng),
                         testutil::random_point(1, 0.0, 6.0, rng), false);
  }
  const LinalgOpCounts counts = linalg_op_counts();
  CHECK(counts.dense_factorizations == 0);
  CHECK(counts.bordered_extensions == 0);
  CHECK(counts.rank_one_updates == 25);
  CHECK(state.A().dim() == 6);
  CHECK(state.C().dim() == 6);
}

TEST_CASE("states are value types: a copy is an isolated snapshot") {
  RecursiveState state = seeded_run(149, 10, 3);
  const RecursiveState snapshot = state;
  const StateAction q({1.3});
  const auto before = snapshot.predict(q);
  state.add_transition(2.0, StateAction({0.9}), false);
  const auto after = snapshot.predict(q);
  CHECK(before.mean == after.mean);
  CHECK(before.variance == after.variance);
  CHECK_FALSE(states_equal(state, snapshot));
}

TEST_CASE("checkpoint: round-trip reproduces predictions exactly") {
  const RecursiveState state = seeded_run(151, 18, 5);
  std::stringstream ss;
  state.save(ss);
  const RecursiveState restored = RecursiveState::load(ss);
  CHECK(states_equal(state, restored));
  std::mt19937_64 rng(152);
  for (int q = 0; q < 10; ++q) {
    const StateAction x = testutil::random_point(1, -1.0, 7.0, rng);
    const auto a = state.predict(x);
    const auto b = restored.predict(x);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
  }

  // restored states keep working
  RecursiveState continued = restored;
  continued.add_transition(0.3, StateAction({1.7}), false);
  std::mt19937_64 qrng(153);
  CHECK(batch_disagreement(continued, qrng) <= 1e-8);
}

TEST_CASE("checkpoint: version and shape validation") {
  std::stringstream bad_version(
      "{\"format\":\"spgptd.recursive_state\",\"version\":99}");
  CHECK_THROWS_AS(RecursiveState::load(bad_version), InvalidArgument);
  std::stringstream garbage("not json at all");
  CHECK_THROWS_AS(RecursiveState::load(garbage), InvalidArgument);
}

TEST_CASE("property: seeded interleavings all match the batch oracle") {
  for (int run = 0; run < 10; ++run) {
    std::mt19937_64 rng(1000 + run);
    const auto pool = testutil::separated_points(7, 1, 0.0, 9.0, 0.7, rng);
    std::normal_distribution<double> reward(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    RecursiveState state = RecursiveState::init(
        unit_spec, 0.85, 0.05, PseudoInputSet({pool[0], pool[1]}),
        testutil::random_point(1, 0.0, 6.0, rng));
    std::size_t next = 2;
    const int target = 8 + static_cast<int>(rng() % 20);
    while (state.n_transitions() < target) {
      const double u = uniform(rng);
      const StateAction x_next = testutil::random_point(1, 0.0, 6.0, rng);
      if (u < 0.7 || next >= pool.size()) {
        state.add_transition(reward(rng), x_next, uniform(rng) < 0.1);
      } else if (u < 0.85) {
        state.add_pseudo_input(pool[next++]);
      } else {
        state.add_both(reward(rng), x_next, uniform(rng) < 0.1,
                       pool[next++]);
      }
    }
    std::mt19937_64 qrng(2000 + run);
    INFO("interleaving seed " << 1000 + run);
    CHECK(batch_disagreement(state, qrng) <= 1e-8);
    check_internal_invariants(state);
  }
}
