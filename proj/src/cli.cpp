#include "spgptd/cli.hpp"

#include <nlohmann/json.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace spgptd::cli {

using nlohmann::json;

namespace {

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["kernel"] = {
      {"lengthscales",
       std::vector<double>(c.hyper.kernel.lengthscales.begin(),
                           c.hyper.kernel.lengthscales.end())},
      {"signal_variance", c.hyper.kernel.signal_variance}};
  j["gamma"] = c.hyper.gamma;
  j["sigma2"] = c.hyper.sigma2;
  j["mdp"] = {{"kind", c.mdp.kind == MdpKind::chain ? "chain" : "toy1d"},
              {"n_states", c.mdp.n_states},
              {"goal_reward", c.mdp.goal_reward},
              {"step_reward", c.mdp.step_reward},
              {"actions", c.mdp.actions}};
  j["policy"] = c.policy;
  j["pseudo"] = {{"count", c.pseudo_count}, {"init", c.pseudo_init}};
  j["episodes"] = c.episodes;
  j["max_episode_steps"] = c.max_episode_steps;
  j["steps"] = c.steps;
  j["transitions"] = c.transitions;
  j["refine_budget"] = c.refine_budget;
  j["grid_points"] = c.grid_points;
  j["seed"] = c.seed;
  j["out"] = c.out_dir;
  j["suites"] = {{"lemma_instances", c.lemma_instances},
                 {"oracle_interleavings", c.oracle_interleavings},
                 {"zx_datasets", c.zx_datasets},
                 {"dual_instances", c.dual_instances},
                 {"nonneg_evaluations", c.nonneg_evaluations}};
  j["tolerances"] = {{"lemma", c.tol_lemma},
                     {"oracle", c.tol_oracle},
                     {"zx", c.tol_zx},
                     {"dual", c.tol_dual}};
  return j;
}

void apply_json(ExperimentConfig& c, const json& j) {
  try {
    if (j.contains("kernel")) {
      const auto& k = j.at("kernel");
      Eigen::VectorXd ls = c.hyper.kernel.lengthscales;
      if (k.contains("lengthscales")) {
        const auto values = k.at("lengthscales").get<std::vector<double>>();
        ls = Eigen::Map<const Eigen::VectorXd>(
            values.data(), static_cast<Eigen::Index>(values.size()));
      }
      const double sv =
          k.value("signal_variance", c.hyper.kernel.signal_variance);
      c.hyper.kernel = KernelSpec(ls, sv);
    }
    c.hyper.gamma = j.value("gamma", c.hyper.gamma);
    c.hyper.sigma2 = j.value("sigma2", c.hyper.sigma2);
    if (j.contains("mdp")) {
      const auto& m = j.at("mdp");
      if (m.contains("kind")) {
        const std::string kind = m.at("kind").get<std::string>();
        if (kind == "chain") {
          c.mdp.kind = MdpKind::chain;
        } else if (kind == "toy1d") {
          c.mdp.kind = MdpKind::toy1d;
        } else {
          throw ConfigError("unknown MDP kind '" + kind + "'");
        }
      }
      c.mdp.n_states = m.value("n_states", c.mdp.n_states);
      c.mdp.goal_reward = m.value("goal_reward", c.mdp.goal_reward);
      c.mdp.step_reward = m.value("step_reward", c.mdp.step_reward);
      if (m.contains("actions")) {
        c.mdp.actions = m.at("actions").get<std::vector<double>>();
      }
    }
    c.policy = j.value("policy", c.policy);
    if (j.contains("pseudo")) {
      c.pseudo_count = j.at("pseudo").value("count", c.pseudo_count);
      c.pseudo_init = j.at("pseudo").value("init", c.pseudo_init);
    }
    c.episodes = j.value("episodes", c.episodes);
    c.max_episode_steps = j.value("max_episode_steps", c.max_episode_steps);
    c.steps = j.value("steps", c.steps);
    c.transitions = j.value("transitions", c.transitions);
    c.refine_budget = j.value("refine_budget", c.refine_budget);
    c.grid_points = j.value("grid_points", c.grid_points);
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out", c.out_dir);
    if (j.contains("suites")) {
      const auto& s = j.at("suites");
      c.lemma_instances = s.value("lemma_instances", c.lemma_instances);
      c.oracle_interleavings =
          s.value("oracle_interleavings", c.oracle_interleavings);
      c.zx_datasets = s.value("zx_datasets", c.zx_datasets);
      c.dual_instances = s.value("dual_instances", c.dual_instances);
      c.nonneg_evaluations =
          s.value("nonneg_evaluations", c.nonneg_evaluations);
    }
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      c.tol_lemma = t.value("lemma", c.tol_lemma);
      c.tol_oracle = t.value("oracle", c.tol_oracle);
      c.tol_zx = t.value("zx", c.tol_zx);
      c.tol_dual = t.value("dual", c.tol_dual);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void validate_config(const ExperimentConfig& c) {
  if (!(c.hyper.gamma >= 0.0 && c.hyper.gamma <= 1.0)) {
    throw ConfigError("config: gamma must lie in [0, 1]");
  }
  if (!(c.hyper.sigma2 > 0.0)) {
    throw ConfigError("config: sigma2 must be positive");
  }
  if ((c.hyper.kernel.lengthscales.array() <= 0.0).any()) {
    throw ConfigError("config: lengthscales must be positive");
  }
  if (c.pseudo_count < 1 || c.episodes < 1 || c.steps < 1 ||
      c.grid_points < 1 || c.refine_budget < 1 || c.max_episode_steps < 1) {
    throw ConfigError("config: counts and budgets must be positive");
  }
  if (c.pseudo_init != "subsample" && c.pseudo_init != "uniform-grid") {
    throw ConfigError("config: pseudo init must be subsample or uniform-grid");
  }
  if (c.policy != "right" && c.policy != "left" && c.policy != "random") {
    throw ConfigError("config: policy must be right, left or random");
  }
  try {
    c.mdp.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::ofstream open_output(const ExperimentConfig& c, const std::string& name) {
  std::filesystem::create_directories(c.out_dir);
  const auto path = std::filesystem::path(c.out_dir) / name;
  std::ofstream os(path);
  if (!os) {
    throw ConfigError("cannot open output file " + path.string());
  }
  return os;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

void write_csv_header_comment(std::ostream& os, const ExperimentConfig& c) {
  os << "# spgptd " << kVersion << " config_hash=" << hash_hex(c.hash())
     << '\n';
}

}  // namespace

std::uint64_t ExperimentConfig::hash() const {
  const std::string canonical = config_to_json(*this).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (const unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentConfig::to_json_string() const {
  return config_to_json(*this).dump(2);
}

ExperimentConfig load_config(const std::string& command,
                             const std::string& config_path,
                             const ConfigOverrides& overrides) {
  ExperimentConfig config;
  if (command == "posterior") {
    // The posterior-curve command targets the 1-D toy task; shorter state
    // lengthscale so five support points are not already saturating.
    config.mdp.kind = MdpKind::toy1d;
    config.mdp.actions = {-0.1, +0.1};
    config.hyper.kernel =
        KernelSpec(Eigen::Vector2d(0.3, 1.0), 1.0);
    config.pseudo_count = 5;
  }

  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) {
      throw ConfigError("cannot read config file " + config_path);
    }
    json j;
    try {
      is >> j;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config parse: ") + e.what());
    }
    apply_json(config, j);
  }

  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.out_dir) config.out_dir = *overrides.out_dir;
  if (overrides.gamma) config.hyper.gamma = *overrides.gamma;
  if (overrides.sigma2) config.hyper.sigma2 = *overrides.sigma2;
  if (overrides.episodes) config.episodes = *overrides.episodes;
  if (overrides.steps) config.steps = *overrides.steps;
  if (overrides.transitions) config.transitions = *overrides.transitions;
  if (overrides.pseudo_count) config.pseudo_count = *overrides.pseudo_count;
  if (overrides.refine_budget) config.refine_budget = *overrides.refine_budget;
  if (overrides.grid_points) config.grid_points = *overrides.grid_points;
  if (overrides.policy) config.policy = *overrides.policy;

  if (command == "posterior" && config.mdp.kind != MdpKind::toy1d) {
    throw ConfigError("posterior: requires the 1-D toy MDP (kind toy1d)");
  }
  validate_config(config);
  return config;
}

int cmd_validate(const ExperimentConfig& config) {
  std::vector<validation::SuiteResult> suites;
  suites.push_back(validation::partition_lemma_suite(
      config.lemma_instances, config.seed, config.tol_lemma));
  suites.push_back(validation::oracle_equivalence_suite(
      config.oracle_interleavings, config.seed, config.tol_oracle));
  suites.push_back(validation::zx_degeneracy_suite(config.zx_datasets,
                                                   config.seed,
                                                   config.tol_zx));
  suites.push_back(validation::dual_route_suite(config.dual_instances,
                                                config.seed,
                                                config.tol_dual));
  suites.push_back(
      validation::nonnegativity_suite(config.nonneg_evaluations, config.seed));

  bool all_pass = true;
  json report;
  report["tool"] = "spgptd";
  report["version"] = kVersion;
  report["config_hash"] = hash_hex(config.hash());
  report["suites"] = json::array();
  for (const auto& s : suites) {
    all_pass = all_pass && s.pass;
    report["suites"].push_back({{"suite", s.suite},
                                {"cases", s.cases},
                                {"max_error", s.max_error},
                                {"tolerance", s.tolerance},
                                {"seconds", s.seconds},
                                {"pass", s.pass}});
    std::cout << (s.pass ? "[PASS] " : "[FAIL] ") << s.suite << ": cases="
              << s.cases << " max_error=" << s.max_error
              << " tolerance=" << s.tolerance << " (" << s.seconds << "s)\n";
  }
  report["pass"] = all_pass;

  auto os = open_output(config, "validate_report.json");
  os << report.dump(2) << '\n';
  return all_pass ? 0 : 1;
}

int cmd_bench(const ExperimentConfig& config) {
  validation::BenchResult bench;
  try {
    bench = validation::run_incremental_bench(config.steps,
                                              config.pseudo_count, config.seed,
                                              /*spot_interval=*/50,
                                              config.tol_oracle);
  } catch (const NumericalDegeneracy& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return 1;
  }

  auto os = open_output(config, "bench.csv");
  write_csv_header_comment(os, config);
  os << "step,recursive_update_seconds,batch_rebuild_seconds,k,t\n";
  os.precision(12);
  for (const auto& row : bench.rows) {
    os << row.step << ',' << row.recursive_update_seconds << ','
       << row.batch_rebuild_seconds << ',' << row.k << ',' << row.t << '\n';
  }

  std::cout << "recursive mean step time: early=" << bench.recursive_early_mean
            << "s late=" << bench.recursive_late_mean
            << "s | batch rebuild: early=" << bench.batch_early_mean
            << "s late=" << bench.batch_late_mean
            << "s | max spot error=" << bench.max_spot_error << '\n';
  return 0;
}

int cmd_posterior(const ExperimentConfig& config) {
  if (config.transitions < 2) {
    throw ConfigError("posterior: need at least 2 transitions");
  }
  const validation::PosteriorCurves curves = validation::posterior_comparison(
      config.hyper, config.transitions, config.pseudo_count,
      config.refine_budget, config.grid_points, config.seed);

  auto os = open_output(config, "posterior.csv");
  write_csv_header_comment(os, config);
  os << "x,exact_mean,exact_var,sparse_random_mean,sparse_random_var,"
        "sparse_refined_mean,sparse_refined_var\n";
  os.precision(12);
  for (std::size_t i = 0; i < curves.grid.size(); ++i) {
    os << curves.grid[i] << ',' << curves.exact_mean[i] << ','
       << curves.exact_var[i] << ',' << curves.random_mean[i] << ','
       << curves.random_var[i] << ',' << curves.refined_mean[i] << ','
       << curves.refined_var[i] << '\n';
  }
  std::cout << "posterior-mean RMSE vs exact: random=" << curves.rmse_random
            << " refined=" << curves.rmse_refined << '\n';
  return 0;
}

int cmd_run(const ExperimentConfig& config) {
  // Subsampling needs training inputs in hand; the streaming run always
  // seeds its support from the declared input range.
  const PseudoInputSet pseudo =
      validation::init_pseudo_grid(config.mdp, config.pseudo_count);
  Hyperparams hyper = config.hyper;
  hyper.gamma = config.mdp.gamma;

  RecursiveEstimator estimator(hyper, pseudo);
  const FixedPolicy policy = make_policy(config.policy);
  const PolicyEvaluationResult result =
      run_policy_evaluation(config.mdp, policy, estimator, config.episodes,
                            config.seed, config.max_episode_steps);

  std::optional<Eigen::MatrixXd> dp;
  if (config.mdp.finite()) {
    dp = dp_value_oracle(config.mdp, policy);
  }

  auto os = open_output(config, "value_table.csv");
  write_csv_header_comment(os, config);
  os << "state,action_index,action,mean,variance";
  if (dp) {
    os << ",dp_value,abs_error";
  }
  os << '\n';
  os.precision(12);
  double max_dp_error = 0.0;
  for (const auto& row : result.value_table) {
    os << row.state << ',' << row.action_index << ','
       << config.mdp.actions[static_cast<std::size_t>(row.action_index)]
       << ',' << row.mean << ',' << row.variance;
    if (dp) {
      const double truth = (*dp)(static_cast<int>(row.state),
                                 row.action_index);
      const double err = std::abs(row.mean - truth);
      max_dp_error = std::max(max_dp_error, err);
      os << ',' << truth << ',' << err;
    }
    os << '\n';
  }

  for (std::size_t e = 0; e < result.episodes.size(); ++e) {
    std::ostringstream name;
    name << "episode_" << std::setw(3) << std::setfill('0') << e;
    auto csv = open_output(config, name.str() + ".csv");
    write_csv_header_comment(csv, config);
    result.episodes[e].write_csv(csv);

    json sidecar;
    sidecar["tool"] = "spgptd";
    sidecar["version"] = kVersion;
    sidecar["config_hash"] = hash_hex(config.hash());
    sidecar["seed"] = result.episodes[e].seed;
    sidecar["policy"] = result.episodes[e].policy;
    sidecar["episode"] = e;
    sidecar["gamma"] = config.mdp.gamma;
    sidecar["sigma2"] = config.hyper.sigma2;
    sidecar["mdp"] = {{"kind", config.mdp.finite() ? "chain" : "toy1d"},
                      {"n_states", config.mdp.n_states},
                      {"goal_reward", config.mdp.goal_reward},
                      {"step_reward", config.mdp.step_reward},
                      {"actions", config.mdp.actions}};
    auto js = open_output(config, name.str() + ".json");
    js << sidecar.dump(2) << '\n';
  }

  if (dp) {
    std::cout << "max |predicted - dp| over all pairs: " << max_dp_error
              << '\n';
  }
  return 0;
}

}  // namespace spgptd::cli
