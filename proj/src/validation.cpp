#include "spgptd/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace spgptd::validation {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double rel_error(double diff_norm, double ref_norm) {
  return diff_norm / (1.0 + ref_norm);
}

Eigen::MatrixXd random_spd(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd M(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      M(i, j) = normal(rng);
    }
  }
  Eigen::MatrixXd K = M * M.transpose();
  K.diagonal().array() += static_cast<double>(dim);
  return 0.5 * (K + K.transpose());
}

std::vector<StateAction> min_dist_points(int count, int dim, double lo,
                                         double hi, double min_dist,
                                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(lo, hi);
  std::vector<StateAction> points;
  int attempts = 0;
  int since_last_success = 0;
  while (static_cast<int>(points.size()) < count) {
    if (++attempts > 200000) {
      throw Error("min_dist_points: rejection sampling stalled");
    }
    if (++since_last_success > 2000) {
      points.clear();  // dead-end placement, start over
      since_last_success = 0;
    }
    Eigen::VectorXd c(dim);
    for (int d = 0; d < dim; ++d) {
      c(d) = uniform(rng);
    }
    bool ok = true;
    for (const auto& p : points) {
      if ((p.coords() - c).norm() < min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) {
      points.emplace_back(c);
      since_last_success = 0;
    }
  }
  return points;
}

Eigen::MatrixXd random_kernel_gram(int dim, std::mt19937_64& rng) {
  const KernelSpec spec = KernelSpec::isotropic(2, 0.5, 1.0);
  const auto points = min_dist_points(dim, 2, 0.0, 4.0, 0.3, rng);
  Eigen::MatrixXd K = k_matrix(spec, points, points);
  K.diagonal().array() += 1e-6;  // keep deep growth comfortably SPD
  return K;
}

struct RandomProblem {
  KernelSpec spec;
  double gamma;
  double sigma2;
};

RandomProblem random_problem(int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> len(0.3, 0.6);
  std::uniform_real_distribution<double> sig(0.5, 2.0);
  std::uniform_real_distribution<double> gam(0.0, 0.95);
  std::uniform_real_distribution<double> noise(0.05, 0.3);
  Eigen::VectorXd ls(dim);
  for (int d = 0; d < dim; ++d) {
    ls(d) = len(rng);
  }
  return {KernelSpec(ls, sig(rng)), gam(rng), noise(rng)};
}

StateAction random_walk_step(const StateAction& from, double lo, double hi,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.5);
  Eigen::VectorXd c = from.coords();
  for (Eigen::Index d = 0; d < c.size(); ++d) {
    c(d) = std::clamp(c(d) + normal(rng), lo, hi);
  }
  return StateAction(c);
}

StateAction random_point(int dim, double lo, double hi,
                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(lo, hi);
  Eigen::VectorXd c(dim);
  for (int d = 0; d < dim; ++d) {
    c(d) = uniform(rng);
  }
  return StateAction(c);
}

double max_norm(const Eigen::MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace

SuiteResult partition_lemma_suite(int instances, std::uint64_t seed,
                                  double tolerance) {
  const auto start = Clock::now();
  SuiteResult result{"partition_lemma", instances, 0.0, tolerance, false, 0.0};

  for (int i = 0; i < instances; ++i) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i));
    const int dim = 1 + static_cast<int>(rng() % 20);
    const Eigen::MatrixXd K =
        (i % 2 == 0) ? random_spd(dim, rng) : random_kernel_gram(dim, rng);

    SpdInverse grown = dense_spd_inverse(K.topLeftCorner(1, 1), 0.0);
    for (int j = 1; j < dim; ++j) {
      grown = extend_spd_inverse(grown, K.block(0, j, j, 1), K(j, j)).inverse;
    }
    const SpdInverse dense = dense_spd_inverse(K, 0.0);
    result.max_error =
        std::max(result.max_error, max_norm(grown.inv - dense.inv));
  }
  result.seconds = seconds_since(start);
  result.pass = result.max_error <= tolerance;
  return result;
}

namespace {

double compare_state_to_batch(const RecursiveState& state,
                              std::mt19937_64& rng, int n_queries) {
  const TransitionDataset dataset = state.to_dataset();
  const PosteriorParams params =
      spgp_batch_params(dataset, state.pseudo(), state.spec());

  double err = rel_error(max_norm(state.alpha() - params.alpha),
                         max_norm(params.alpha));
  err = std::max(err, rel_error(max_norm(state.P() - params.P),
                                max_norm(params.P)));
  const int dim = static_cast<int>(state.spec().lengthscales.size());
  for (int q = 0; q < n_queries; ++q) {
    const StateAction x = random_point(dim, -0.5, 3.5, rng);
    const PredictiveMoments rec = state.predict(x);
    const PredictiveMoments ref = spgp_predict(params, x);
    err = std::max(err, rel_error(std::abs(rec.mean - ref.mean),
                                  std::abs(ref.mean)));
    err = std::max(err, rel_error(std::abs(rec.variance - ref.variance),
                                  std::abs(ref.variance)));
  }
  return err;
}

}  // namespace

SuiteResult oracle_equivalence_suite(int interleavings, std::uint64_t seed,
                                     double tolerance) {
  const auto start = Clock::now();
  SuiteResult result{"oracle_equivalence", interleavings, 0.0, tolerance,
                     false, 0.0};

  for (int i = 0; i < interleavings; ++i) {
    std::mt19937_64 rng(seed + 1000 + static_cast<std::uint64_t>(i));
    const int dim = 1 + i % 2;
    const RandomProblem prob = random_problem(dim, rng);

    const double max_len = prob.spec.lengthscales.maxCoeff();
    const auto pool = min_dist_points(10, dim, 0.0, dim == 1 ? 6.0 : 4.0,
                                      0.7 * max_len, rng);
    std::size_t next_pseudo = 1 + rng() % 3;
    PseudoInputSet initial(std::vector<StateAction>(
        pool.begin(), pool.begin() + static_cast<long>(next_pseudo)));

    const double hi = dim == 1 ? 6.0 : 4.0;
    StateAction x = random_point(dim, 0.0, hi, rng);
    RecursiveState state = RecursiveState::init(prob.spec, prob.gamma,
                                                prob.sigma2, initial, x);

    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> reward_dist(0.0, 1.0);
    const int n_transitions = 10 + static_cast<int>(rng() % 50);
    while (state.n_transitions() < n_transitions) {
      const double u = uniform(rng);
      const bool pool_left = next_pseudo < pool.size();
      const StateAction x_next = random_walk_step(x, 0.0, hi, rng);
      const double reward = reward_dist(rng);
      const bool terminal = uniform(rng) < 0.1;
      if (u < 0.75 || !pool_left) {
        state.add_transition(reward, x_next, terminal);
        x = x_next;
      } else if (u < 0.9) {
        state.add_pseudo_input(pool[next_pseudo++]);
      } else {
        state.add_both(reward, x_next, terminal, pool[next_pseudo++]);
        x = x_next;
      }
    }
    result.max_error =
        std::max(result.max_error, compare_state_to_batch(state, rng, 10));
  }
  result.seconds = seconds_since(start);
  result.pass = result.max_error <= tolerance;
  return result;
}

SuiteResult zx_degeneracy_suite(int datasets, std::uint64_t seed,
                                double tolerance) {
  const auto start = Clock::now();
  SuiteResult result{"zx_degeneracy", datasets, 0.0, tolerance, false, 0.0};

  for (int i = 0; i < datasets; ++i) {
    std::mt19937_64 rng(seed + 2000 + static_cast<std::uint64_t>(i));
    const int dim = 1 + i % 2;
    std::uniform_real_distribution<double> len(0.2, dim == 1 ? 0.35 : 0.5);
    std::uniform_real_distribution<double> gam(0.0, 0.95);
    std::uniform_real_distribution<double> noise(0.05, 0.2);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> reward_dist(0.0, 1.0);

    const KernelSpec spec = KernelSpec::isotropic(dim, len(rng), 1.0);
    const double gamma = gam(rng);
    const double sigma2 = noise(rng);
    const int t = 5 + static_cast<int>(rng() % (dim == 1 ? 14 : 21));
    const auto points = min_dist_points(
        t, dim, 0.0, dim == 1 ? 5.0 : 4.0,
        0.75 * spec.lengthscales.minCoeff(), rng);

    TransitionDataset dataset(gamma, sigma2, points[0]);
    for (int j = 1; j < t; ++j) {
      dataset.add_transition(reward_dist(rng), points[static_cast<std::size_t>(j)],
                             uniform(rng) < 0.15);
    }

    const PseudoInputSet Z(dataset.inputs());
    const PosteriorParams params = spgp_batch_params(dataset, Z, spec);
    const ExactGpSarsa exact(dataset, spec);
    for (int q = 0; q < 20; ++q) {
      const StateAction x = random_point(dim, 0.0, 4.0, rng);
      const PredictiveMoments sparse = spgp_predict(params, x);
      const PredictiveMoments ref = exact.predict(x);
      result.max_error = std::max(
          result.max_error,
          rel_error(std::abs(sparse.mean - ref.mean), std::abs(ref.mean)));
      result.max_error =
          std::max(result.max_error,
                   rel_error(std::abs(sparse.variance - ref.variance),
                             std::abs(ref.variance)));
    }
  }
  result.seconds = seconds_since(start);
  result.pass = result.max_error <= tolerance;
  return result;
}

SuiteResult dual_route_suite(int instances, std::uint64_t seed,
                             double tolerance) {
  const auto start = Clock::now();
  SuiteResult result{"dual_route", instances, 0.0, tolerance, false, 0.0};

  for (int i = 0; i < instances; ++i) {
    std::mt19937_64 rng(seed + 3000 + static_cast<std::uint64_t>(i));
    const int dim = 1 + i % 2;
    const RandomProblem prob = random_problem(dim, rng);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> reward_dist(0.0, 1.0);

    StateAction x = random_point(dim, 0.0, 3.0, rng);
    TransitionDataset dataset(prob.gamma, prob.sigma2, x);
    const int t = 5 + static_cast<int>(rng() % 26);
    for (int j = 1; j < t; ++j) {
      const StateAction x_next = random_walk_step(x, 0.0, 3.0, rng);
      dataset.add_transition(reward_dist(rng), x_next, uniform(rng) < 0.1);
      x = x_next;
    }
    const int m = 2 + static_cast<int>(rng() % 7);
    const PseudoInputSet Z(min_dist_points(
        m, dim, 0.0, dim == 1 ? 5.0 : 3.0,
        0.7 * prob.spec.lengthscales.maxCoeff(), rng));

    const PosteriorParams params = spgp_batch_params(dataset, Z, prob.spec);
    for (int q = 0; q < 10; ++q) {
      const StateAction query = random_point(dim, -0.5, 3.5, rng);
      const PredictiveMoments a = spgp_predict(params, query);
      const PredictiveMoments b =
          spgp_predict_reference(dataset, Z, prob.spec, query);
      result.max_error = std::max(
          result.max_error,
          rel_error(std::abs(a.mean - b.mean), std::abs(b.mean)));
      result.max_error =
          std::max(result.max_error, rel_error(std::abs(a.variance - b.variance),
                                               std::abs(b.variance)));
    }
  }
  result.seconds = seconds_since(start);
  result.pass = result.max_error <= tolerance;
  return result;
}

SuiteResult nonnegativity_suite(long evaluations, std::uint64_t seed) {
  const auto start = Clock::now();
  SuiteResult result{"nonnegativity", 0, 0.0, 1e-12, false, 0.0};
  double worst = 0.0;  // most negative value seen, as a positive magnitude

  std::mt19937_64 rng(seed + 4000);
  std::uniform_real_distribution<double> gam(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // TD-differenced kernel scalar over adversarially close and far pairs.
  for (long i = 0; i < evaluations; ++i) {
    const int dim = 1 + static_cast<int>(rng() % 3);
    const RandomProblem prob = random_problem(dim, rng);
    const StateAction a = random_point(dim, 0.0, 3.0, rng);
    StateAction b = random_point(dim, 0.0, 3.0, rng);
    const double mode = uniform(rng);
    if (mode < 0.15) {
      b = a;  // exact overlap
    } else if (mode < 0.3) {
      Eigen::VectorXd c = a.coords();
      c(0) += 1e-9;  // near overlap
      b = StateAction(c);
    }
    const double gamma = mode < 0.1 ? 1.0 : gam(rng);
    const double d2 = delta2_k(prob.spec, a, b, gamma);
    worst = std::max(worst, -d2);
    ++result.cases;
  }

  // Noise-diagonal positivity through the maintained recursion.
  std::normal_distribution<double> reward_dist(0.0, 1.0);
  for (int run = 0; run < 100; ++run) {
    const int dim = 1 + run % 2;
    const RandomProblem prob = random_problem(dim, rng);
    const int m = 2 + static_cast<int>(rng() % 5);
    const PseudoInputSet Z(min_dist_points(
        m, dim, 0.0, 3.0, 0.7 * prob.spec.lengthscales.maxCoeff(), rng));
    StateAction x = random_point(dim, 0.0, 3.0, rng);
    RecursiveState state =
        RecursiveState::init(prob.spec, prob.gamma, prob.sigma2, Z, x);
    const int t = 10 + static_cast<int>(rng() % 11);
    for (int j = 0; j < t; ++j) {
      const StateAction x_next = random_walk_step(x, 0.0, 3.0, rng);
      state.add_transition(reward_dist(rng), x_next, uniform(rng) < 0.1);
      x = x_next;
    }
    for (const double b_entry : state.b()) {
      // residual = 1/b - sigma2 is the per-row sparse-correction slack
      const double residual = 1.0 / b_entry - state.sigma2();
      worst = std::max(worst, -residual);
      if (!(b_entry > 0.0)) {
        worst = std::max(worst, 1.0);  // hard positivity violation
      }
      ++result.cases;
    }
  }

  result.max_error = worst;
  result.seconds = seconds_since(start);
  result.pass = worst <= result.tolerance;
  return result;
}

BenchResult run_incremental_bench(int n_steps, int m_pseudo,
                                  std::uint64_t seed, int spot_interval,
                                  double spot_tolerance) {
  if (n_steps < 1 || m_pseudo < 1) {
    throw InvalidArgument("run_incremental_bench: bad sizes");
  }
  std::mt19937_64 rng(seed);
  const KernelSpec spec = KernelSpec::isotropic(2, 1.0, 1.0);
  const double gamma = 0.9;
  const double sigma2 = 0.1;
  const PseudoInputSet Z(min_dist_points(m_pseudo, 2, 0.0, 3.0, 0.7, rng));
  std::normal_distribution<double> reward_dist(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  StateAction x = random_point(2, 0.0, 3.0, rng);
  RecursiveState state = RecursiveState::init(spec, gamma, sigma2, Z, x);
  state.reserve(static_cast<std::size_t>(n_steps));
  TransitionDataset dataset(gamma, sigma2, x);

  BenchResult result;
  result.rows.reserve(static_cast<std::size_t>(n_steps));
  for (int step_idx = 1; step_idx <= n_steps; ++step_idx) {
    const StateAction x_next = random_walk_step(x, 0.0, 3.0, rng);
    const double reward = reward_dist(rng);
    const bool terminal = uniform(rng) < 0.05;
    x = x_next;

    const auto t0 = Clock::now();
    state.add_transition(reward, x_next, terminal);
    const double rec_seconds = seconds_since(t0);

    dataset.add_transition(reward, x_next, terminal);
    const auto t1 = Clock::now();
    const PosteriorParams params = spgp_batch_params(dataset, Z, spec);
    const double batch_seconds = seconds_since(t1);

    result.rows.push_back({step_idx, rec_seconds, batch_seconds, m_pseudo,
                           static_cast<int>(dataset.t())});

    if (spot_interval > 0 && step_idx % spot_interval == 0) {
      for (int q = 0; q < 3; ++q) {
        const StateAction query = random_point(2, -0.5, 3.5, rng);
        const PredictiveMoments rec = state.predict(query);
        const PredictiveMoments ref = spgp_predict(params, query);
        result.max_spot_error = std::max(
            result.max_spot_error,
            rel_error(std::abs(rec.mean - ref.mean), std::abs(ref.mean)));
        result.max_spot_error =
            std::max(result.max_spot_error,
                     rel_error(std::abs(rec.variance - ref.variance),
                               std::abs(ref.variance)));
      }
    }
  }
  if (result.max_spot_error > spot_tolerance) {
    throw NumericalDegeneracy(
        "run_incremental_bench: recursive and batch predictions diverged");
  }

  auto window_mean = [&](int lo, int hi, auto getter) {
    double sum = 0.0;
    int count = 0;
    for (const auto& row : result.rows) {
      if (row.step >= lo && row.step <= hi) {
        sum += getter(row);
        ++count;
      }
    }
    return count > 0 ? sum / count : 0.0;
  };
  const int early_lo = std::max(1, n_steps / 10);
  const int early_hi = std::max(early_lo, 3 * n_steps / 10);
  const int late_lo = std::max(early_hi, 4 * n_steps / 5);
  const int late_hi = n_steps;
  result.recursive_early_mean = window_mean(
      early_lo, early_hi, [](const BenchRow& r) { return r.recursive_update_seconds; });
  result.recursive_late_mean = window_mean(
      late_lo, late_hi, [](const BenchRow& r) { return r.recursive_update_seconds; });
  result.batch_early_mean = window_mean(
      early_lo, early_hi, [](const BenchRow& r) { return r.batch_rebuild_seconds; });
  result.batch_late_mean = window_mean(
      late_lo, late_hi, [](const BenchRow& r) { return r.batch_rebuild_seconds; });
  return result;
}

PseudoInputSet init_pseudo_grid(const MdpSpec& mdp, int count) {
  mdp.validate();
  if (count < 1) {
    throw InvalidArgument("init_pseudo_grid: count must be >= 1");
  }
  const int m = static_cast<int>(mdp.actions.size());
  const int n_state_points = std::max(1, (count + m - 1) / m);
  const double lo = 0.0;
  const double hi =
      mdp.kind == MdpKind::chain ? static_cast<double>(mdp.n_states - 1) : 1.0;

  std::vector<StateAction> points;
  for (int i = 0; i < n_state_points && static_cast<int>(points.size()) < count;
       ++i) {
    const double s =
        n_state_points == 1
            ? 0.5 * (lo + hi)
            : lo + (hi - lo) * static_cast<double>(i) / (n_state_points - 1);
    for (int a = 0; a < m && static_cast<int>(points.size()) < count; ++a) {
      points.push_back(mdp.encode(s, a));
    }
  }
  return PseudoInputSet(std::move(points));
}

PseudoInputSet subsample_pseudo(const std::vector<StateAction>& inputs,
                                int count, std::uint64_t seed) {
  if (count < 1) {
    throw InvalidArgument("subsample_pseudo: count must be >= 1");
  }
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  constexpr double kMinSeparation = 1e-3;
  std::vector<StateAction> picked;
  for (const std::size_t idx : order) {
    bool ok = true;
    for (const auto& p : picked) {
      if ((p.coords() - inputs[idx].coords()).norm() < kMinSeparation) {
        ok = false;
        break;
      }
    }
    if (ok) {
      picked.push_back(inputs[idx]);
      if (static_cast<int>(picked.size()) == count) {
        return PseudoInputSet(std::move(picked));
      }
    }
  }
  throw InvalidArgument(
      "subsample_pseudo: not enough distinct inputs to subsample");
}

PosteriorCurves posterior_comparison(const Hyperparams& hyper,
                                     int transitions, int n_pseudo,
                                     long refine_budget, int grid_points,
                                     std::uint64_t seed) {
  if (transitions < 1 || grid_points < 1) {
    throw InvalidArgument("posterior_comparison: bad sizes");
  }
  MdpSpec mdp;
  mdp.kind = MdpKind::toy1d;
  mdp.gamma = hyper.gamma;
  mdp.actions = {-0.1, +0.1};
  mdp.validate();

  std::mt19937_64 rng(seed);
  const FixedPolicy policy = make_policy("random");
  double s = kToy1dTarget;
  int a = policy.sample(mdp, s, rng);
  TransitionDataset dataset(hyper.gamma, hyper.sigma2, mdp.encode(s, a));
  for (int i = 0; i < transitions; ++i) {
    const StepResult res = step(mdp, s, a, rng);
    const int a_next = policy.sample(mdp, res.next_state, rng);
    dataset.add_transition(res.reward, mdp.encode(res.next_state, a_next),
                           false);
    s = res.next_state;
    a = a_next;
  }

  const PseudoInputSet Z0 =
      subsample_pseudo(dataset.inputs(), n_pseudo, seed ^ 0x5eedULL);
  const PseudoInputSet Zr =
      refine_pseudo_inputs(dataset, Z0, hyper.kernel, refine_budget);

  const ExactGpSarsa exact(dataset, hyper.kernel);
  const PosteriorParams params0 = spgp_batch_params(dataset, Z0, hyper.kernel);
  const PosteriorParams paramsR = spgp_batch_params(dataset, Zr, hyper.kernel);

  PosteriorCurves curves;
  double se_random = 0.0;
  double se_refined = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    const double xg =
        grid_points == 1 ? 0.5
                         : static_cast<double>(i) / (grid_points - 1);
    const StateAction query = mdp.encode(xg, 1);
    const PredictiveMoments e = exact.predict(query);
    const PredictiveMoments r0 = spgp_predict(params0, query);
    const PredictiveMoments rr = spgp_predict(paramsR, query);
    curves.grid.push_back(xg);
    curves.exact_mean.push_back(e.mean);
    curves.exact_var.push_back(e.variance);
    curves.random_mean.push_back(r0.mean);
    curves.random_var.push_back(r0.variance);
    curves.refined_mean.push_back(rr.mean);
    curves.refined_var.push_back(rr.variance);
    se_random += (r0.mean - e.mean) * (r0.mean - e.mean);
    se_refined += (rr.mean - e.mean) * (rr.mean - e.mean);
  }
  curves.rmse_random = std::sqrt(se_random / grid_points);
  curves.rmse_refined = std::sqrt(se_refined / grid_points);
  return curves;
}

ChainEvalResult chain_policy_eval(const MdpSpec& mdp,
                                  const std::string& policy,
                                  const Hyperparams& hyper, int episodes,
                                  std::uint64_t seed) {
  mdp.validate();
  Hyperparams effective = hyper;
  effective.gamma = mdp.gamma;  // DP comparison needs the same discount

  const int n_pairs = mdp.n_states * static_cast<int>(mdp.actions.size());
  const PseudoInputSet Z = init_pseudo_grid(mdp, n_pairs);
  RecursiveEstimator estimator(effective, Z);
  const FixedPolicy pol = make_policy(policy);

  ChainEvalResult result;
  PolicyEvaluationResult run =
      run_policy_evaluation(mdp, pol, estimator, episodes, seed);
  result.table = std::move(run.value_table);
  result.dp = dp_value_oracle(mdp, pol);
  for (const auto& row : result.table) {
    const double truth =
        result.dp(static_cast<int>(row.state), row.action_index);
    result.max_abs_error =
        std::max(result.max_abs_error, std::abs(row.mean - truth));
  }
  return result;
}

}  // namespace spgptd::validation
