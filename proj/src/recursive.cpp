#include "spgptd/recursive.hpp"

#include <nlohmann/json.hpp>
#include <istream>
#include <ostream>
#include <string>
#include <utility>

namespace spgptd {

using nlohmann::json;

struct RecursiveState::TransitionPlan {
  double reward;
  StateAction x_new;
  bool terminal;
  Eigen::VectorXd v;   // TD cross column over the pseudo set
  double b_new;
  SpdInverse C_after;  // C with the rank-one growth applied
};

struct RecursiveState::PseudoPlan {
  StateAction z_new;
  BorderedExtension ext_A;
  Eigen::VectorXd w_row;        // TD cross entries of z_new, one per row
  std::vector<double> b_after;  // refreshed noise diagonal, pending row last
  SpdInverse C_after;
  Eigen::MatrixXd F_after;
  Eigen::VectorXd rho_after;
};

RecursiveState RecursiveState::init(KernelSpec spec, double gamma,
                                    double sigma2,
                                    const PseudoInputSet& pseudo,
                                    StateAction x1) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InvalidDiscount("RecursiveState: gamma must lie in [0, 1]");
  }
  if (!(sigma2 > 0.0)) {
    throw InvalidArgument("RecursiveState: sigma2 must be positive");
  }
  RecursiveState state;
  state.spec_ = std::move(spec);
  state.gamma_ = gamma;
  state.sigma2_ = sigma2;
  state.pseudo_ = pseudo;
  state.A_ = pseudo_gram_inverse(pseudo, state.spec_);
  state.C_ = state.A_;  // F = 0 before any transition
  const Eigen::Index k = state.A_.dim();
  state.F_ = Eigen::MatrixXd::Zero(k, k);
  state.rho_ = Eigen::VectorXd::Zero(k);
  state.alpha_ = Eigen::VectorXd::Zero(k);
  state.P_ = Eigen::MatrixXd::Zero(k, k);
  state.inputs_.push_back(std::move(x1));
  return state;
}

void RecursiveState::reserve(std::size_t expected_transitions) {
  inputs_.reserve(expected_transitions + 1);
  rewards_.reserve(expected_transitions);
  terminal_.reserve(expected_transitions);
  b_.reserve(expected_transitions);
  W_cols_.reserve(expected_transitions);
}

void RecursiveState::refresh_posterior_params() {
  alpha_ = C_.inv * rho_;
  P_ = A_.inv - C_.inv;
  P_ = 0.5 * (P_ + P_.transpose()).eval();
}

RecursiveState::TransitionPlan RecursiveState::plan_transition(
    double reward, const StateAction& x_new, bool terminal) const {
  if (!std::isfinite(reward)) {
    throw InvalidArgument("add_transition: reward must be finite");
  }
  const double gamma_eff = terminal ? 0.0 : gamma_;

  TransitionPlan plan;
  plan.reward = reward;
  plan.x_new = x_new;
  plan.terminal = terminal;
  plan.v = delta_k_vector(spec_, pseudo_.points(), last_input(), x_new,
                          gamma_eff);
  const double d2 = delta2_k(spec_, last_input(), x_new, gamma_eff);
  const double inv_b = d2 - plan.v.dot(A_.inv * plan.v) + sigma2_;
  if (!(inv_b > sigma2_ * 1e-10)) {
    throw NumericalDegeneracy(
        "add_transition: noise diagonal entry collapsed (1/b = " +
        std::to_string(inv_b) + ")");
  }
  plan.b_new = 1.0 / inv_b;
  plan.C_after = rank_one_update(C_, plan.v, plan.b_new);
  return plan;
}

void RecursiveState::commit_transition(TransitionPlan&& plan) {
  inputs_.push_back(std::move(plan.x_new));
  rewards_.push_back(plan.reward);
  terminal_.push_back(plan.terminal);
  b_.push_back(plan.b_new);
  F_ += plan.b_new * plan.v * plan.v.transpose();
  F_ = 0.5 * (F_ + F_.transpose()).eval();
  rho_ += plan.b_new * plan.reward * plan.v;
  C_ = std::move(plan.C_after);
  W_cols_.push_back(std::move(plan.v));
  refresh_posterior_params();
}

void RecursiveState::add_transition(double reward, const StateAction& x_new,
                                    bool terminal) {
  commit_transition(plan_transition(reward, x_new, terminal));
}

RecursiveState::PseudoPlan RecursiveState::plan_pseudo(
    const StateAction& z_new, const TransitionPlan* pending) const {
  PseudoPlan plan;
  plan.z_new = z_new;

  // Pseudo-Gram extension; rejects duplicates for both A and, below, C.
  const Eigen::VectorXd border = k_vector(spec_, pseudo_.points(), z_new);
  const double corner = k_eval(spec_, z_new, z_new);
  plan.ext_A = extend_spd_inverse(A_, border, corner);
  const Eigen::VectorXd& g = plan.ext_A.solved_border;
  const double s = plan.ext_A.inv_corner;

  const Eigen::Index n_old = static_cast<Eigen::Index>(W_cols_.size());
  const Eigen::Index n = n_old + (pending != nullptr ? 1 : 0);

  // TD cross entries of the new pseudo point, one per transition row.
  plan.w_row.resize(n);
  for (Eigen::Index i = 0; i < n_old; ++i) {
    const double row_gamma =
        terminal_[static_cast<std::size_t>(i)] ? 0.0 : gamma_;
    plan.w_row(i) =
        k_eval(spec_, inputs_[static_cast<std::size_t>(i)], z_new) -
        row_gamma * k_eval(spec_, inputs_[static_cast<std::size_t>(i) + 1],
                           z_new);
  }
  if (pending != nullptr) {
    const double row_gamma = pending->terminal ? 0.0 : gamma_;
    plan.w_row(n_old) = k_eval(spec_, last_input(), z_new) -
                        row_gamma * k_eval(spec_, pending->x_new, z_new);
  }

  auto column = [&](Eigen::Index i) -> const Eigen::VectorXd& {
    return (pending != nullptr && i == n_old)
               ? pending->v
               : W_cols_[static_cast<std::size_t>(i)];
  };
  auto old_b = [&](Eigen::Index i) {
    return (pending != nullptr && i == n_old)
               ? pending->b_new
               : b_[static_cast<std::size_t>(i)];
  };
  auto reward_at = [&](Eigen::Index i) {
    return (pending != nullptr && i == n_old)
               ? pending->reward
               : rewards_[static_cast<std::size_t>(i)];
  };

  // The new point explains part of every transition, so each noise entry
  // shrinks: 1/b_i' = 1/b_i - s * (g.u_i - w_i)^2.
  plan.b_after.resize(static_cast<std::size_t>(n));
  std::vector<double> excess(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = g.dot(column(i)) - plan.w_row(i);
    const double inv_b = 1.0 / old_b(i) - s * e * e;
    if (!(inv_b > sigma2_ * 1e-10)) {
      throw NumericalDegeneracy(
          "add_pseudo_input: noise diagonal entry collapsed (1/b = " +
          std::to_string(inv_b) + ")");
    }
    plan.b_after[static_cast<std::size_t>(i)] = 1.0 / inv_b;
    excess[static_cast<std::size_t>(i)] =
        plan.b_after[static_cast<std::size_t>(i)] - old_b(i);
  }

  // Bordered extension of C at the stale noise diagonal ...
  Eigen::VectorXd f = Eigen::VectorXd::Zero(A_.dim());
  double f_corner = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    f += old_b(i) * plan.w_row(i) * column(i);
    f_corner += old_b(i) * plan.w_row(i) * plan.w_row(i);
  }
  const SpdInverse& C_base = pending != nullptr ? pending->C_after : C_;
  BorderedExtension ext_C =
      extend_spd_inverse(C_base, border + f, corner + f_corner);
  plan.C_after = std::move(ext_C.inverse);

  // ... then a rank-one reconciliation per transition brings the diagonal
  // current. F is re-accumulated the same way; rho is rebuilt exactly.
  const Eigen::Index k_new = A_.dim() + 1;
  plan.F_after.setZero(k_new, k_new);
  plan.F_after.topLeftCorner(A_.dim(), A_.dim()) =
      pending != nullptr
          ? (F_ + pending->b_new * pending->v * pending->v.transpose()).eval()
          : F_;
  plan.F_after.topRightCorner(A_.dim(), 1) = f;
  plan.F_after.bottomLeftCorner(1, A_.dim()) = f.transpose();
  plan.F_after(k_new - 1, k_new - 1) = f_corner;

  plan.rho_after.setZero(k_new);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd u(k_new);
    u.head(A_.dim()) = column(i);
    u(k_new - 1) = plan.w_row(i);
    const double db = excess[static_cast<std::size_t>(i)];
    if (db > 0.0) {
      plan.C_after = rank_one_update(plan.C_after, u, db);
      plan.F_after += db * u * u.transpose();
    }
    plan.rho_after += plan.b_after[static_cast<std::size_t>(i)] *
                      reward_at(i) * u;
  }
  plan.F_after = 0.5 * (plan.F_after + plan.F_after.transpose()).eval();
  return plan;
}

void RecursiveState::commit_pseudo(PseudoPlan&& plan) {
  pseudo_.add(std::move(plan.z_new));
  A_ = std::move(plan.ext_A.inverse);
  C_ = std::move(plan.C_after);
  F_ = std::move(plan.F_after);
  rho_ = std::move(plan.rho_after);
  b_.assign(plan.b_after.begin(), plan.b_after.end());
  const Eigen::Index k_new = A_.dim();
  for (std::size_t i = 0; i < W_cols_.size(); ++i) {
    W_cols_[i].conservativeResize(k_new);
    W_cols_[i](k_new - 1) = plan.w_row(static_cast<Eigen::Index>(i));
  }
  refresh_posterior_params();
}

void RecursiveState::add_pseudo_input(const StateAction& z_new) {
  commit_pseudo(plan_pseudo(z_new, nullptr));
}

void RecursiveState::add_both(double reward, const StateAction& x_new,
                              bool terminal, const StateAction& z_new) {
  // Both plans are computed before either commit so a failure in the
  // pseudo half cannot leave a half-applied transition behind.
  TransitionPlan t_plan = plan_transition(reward, x_new, terminal);
  PseudoPlan p_plan = plan_pseudo(z_new, &t_plan);
  // The pseudo plan already folded the pending column into W/F/rho/b, but
  // commit_transition must still append the column and bookkeeping. Its F
  // and rho increments are superseded by the pseudo plan's snapshots.
  inputs_.push_back(std::move(t_plan.x_new));
  rewards_.push_back(t_plan.reward);
  terminal_.push_back(t_plan.terminal);
  b_.push_back(t_plan.b_new);
  W_cols_.push_back(std::move(t_plan.v));
  commit_pseudo(std::move(p_plan));
}

PredictiveMoments RecursiveState::predict(const StateAction& x_star) const {
  const Eigen::VectorXd k_z = k_vector(spec_, pseudo_.points(), x_star);
  PredictiveMoments out;
  out.mean = k_z.dot(alpha_);
  out.variance = clamped_variance(k_eval(spec_, x_star, x_star) -
                                  k_z.dot(P_ * k_z));
  return out;
}

TransitionDataset RecursiveState::to_dataset() const {
  TransitionDataset dataset(gamma_, sigma2_, inputs_.front());
  for (std::size_t i = 0; i < rewards_.size(); ++i) {
    dataset.add_transition(rewards_[i], inputs_[i + 1], terminal_[i]);
  }
  return dataset;
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(
        std::vector<double>(m.row(i).begin(), m.row(i).end()));
  }
  return rows;
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(
      values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::VectorXd row = vector_from_json(j[static_cast<std::size_t>(i)]);
    if (i == 0) {
      m.resize(rows, row.size());
    }
    m.row(i) = row;
  }
  return m;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void RecursiveState::save(std::ostream& os) const {
  json j;
  j["format"] = "spgptd.recursive_state";
  j["version"] = kCheckpointVersion;
  j["kernel"] = {{"lengthscales", vector_to_json(spec_.lengthscales)},
                 {"signal_variance", spec_.signal_variance}};
  j["gamma"] = gamma_;
  j["sigma2"] = sigma2_;
  json inputs = json::array();
  for (const auto& x : inputs_) {
    inputs.push_back(vector_to_json(x.coords()));
  }
  j["inputs"] = std::move(inputs);
  j["rewards"] = rewards_;
  j["terminal"] = std::vector<int>(terminal_.begin(), terminal_.end());
  json pseudo = json::array();
  for (const auto& z : pseudo_.points()) {
    pseudo.push_back(vector_to_json(z.coords()));
  }
  j["pseudo"] = std::move(pseudo);
  j["A_inv"] = matrix_to_json(A_.inv);
  j["A_jitter"] = A_.jitter;
  j["C_inv"] = matrix_to_json(C_.inv);
  j["C_jitter"] = C_.jitter;
  j["b"] = b_;
  json w = json::array();
  for (const auto& col : W_cols_) {
    w.push_back(vector_to_json(col));
  }
  j["W_columns"] = std::move(w);
  j["F"] = matrix_to_json(F_);
  j["rho"] = vector_to_json(rho_);
  j["alpha"] = vector_to_json(alpha_);
  j["P"] = matrix_to_json(P_);
  os << j.dump(2) << '\n';
}

RecursiveState RecursiveState::load(std::istream& is) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("checkpoint parse failure: ") +
                          e.what());
  }
  if (j.value("format", "") != "spgptd.recursive_state" ||
      j.value("version", -1) != kCheckpointVersion) {
    throw InvalidArgument("checkpoint: unknown format or version");
  }

  RecursiveState state;
  state.spec_ = KernelSpec(vector_from_json(j.at("kernel").at("lengthscales")),
                           j.at("kernel").at("signal_variance").get<double>());
  state.gamma_ = j.at("gamma").get<double>();
  state.sigma2_ = j.at("sigma2").get<double>();
  for (const auto& x : j.at("inputs")) {
    state.inputs_.emplace_back(vector_from_json(x));
  }
  state.rewards_ = j.at("rewards").get<std::vector<double>>();
  for (const int flag : j.at("terminal").get<std::vector<int>>()) {
    state.terminal_.push_back(flag != 0);
  }
  std::vector<StateAction> pseudo;
  for (const auto& z : j.at("pseudo")) {
    pseudo.emplace_back(vector_from_json(z));
  }
  state.pseudo_ = PseudoInputSet(std::move(pseudo));
  state.A_.inv = matrix_from_json(j.at("A_inv"));
  state.A_.jitter = j.at("A_jitter").get<double>();
  state.C_.inv = matrix_from_json(j.at("C_inv"));
  state.C_.jitter = j.at("C_jitter").get<double>();
  state.b_ = j.at("b").get<std::vector<double>>();
  for (const auto& col : j.at("W_columns")) {
    state.W_cols_.push_back(vector_from_json(col));
  }
  state.F_ = matrix_from_json(j.at("F"));
  state.rho_ = vector_from_json(j.at("rho"));
  state.alpha_ = vector_from_json(j.at("alpha"));
  state.P_ = matrix_from_json(j.at("P"));

  const auto k = static_cast<Eigen::Index>(state.pseudo_.size());
  const auto n = static_cast<std::size_t>(state.rewards_.size());
  if (state.inputs_.size() != n + 1 || state.terminal_.size() != n ||
      state.b_.size() != n || state.W_cols_.size() != n ||
      state.A_.dim() != k || state.C_.dim() != k || state.F_.rows() != k ||
      state.rho_.size() != k || state.alpha_.size() != k ||
      state.P_.rows() != k || state.P_.cols() != k) {
    throw InvalidArgument("checkpoint: inconsistent field dimensions");
  }
  for (const auto& col : state.W_cols_) {
    if (col.size() != k) {
      throw InvalidArgument("checkpoint: inconsistent W column length");
    }
  }
  return state;
}

}  // namespace spgptd
