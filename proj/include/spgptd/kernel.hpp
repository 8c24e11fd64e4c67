#pragma once

#include <Eigen/Dense>
#include <vector>

#include "spgptd/errors.hpp"

namespace spgptd {

inline constexpr const char* kVersion = "1.0.0";

/// A point in the joint state-action input space: state coordinates
/// concatenated with action coordinates. All coordinates must be finite.
class StateAction {
 public:
  StateAction() = default;

  explicit StateAction(Eigen::VectorXd coords) : coords_(std::move(coords)) {
    if (!coords_.allFinite()) {
      throw InvalidArgument("StateAction: non-finite coordinate");
    }
  }

  StateAction(std::initializer_list<double> values)
      : StateAction(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
            values.begin(), static_cast<Eigen::Index>(values.size())))) {}

  const Eigen::VectorXd& coords() const { return coords_; }
  Eigen::Index dim() const { return coords_.size(); }

  bool operator==(const StateAction& other) const {
    return coords_.size() == other.coords_.size() && coords_ == other.coords_;
  }

 private:
  Eigen::VectorXd coords_;
};

/// Squared-exponential covariance with per-dimension lengthscales.
/// k(a, b) = signal_variance * exp(-0.5 * sum_d ((a_d - b_d) / l_d)^2)
///
/// All kernel matrix/vector assembly in the library routes through
/// k_eval, so swapping the covariance family means touching one function.
struct KernelSpec {
  Eigen::VectorXd lengthscales;
  double signal_variance{1.0};

  KernelSpec() = default;
  KernelSpec(Eigen::VectorXd ls, double sv)
      : lengthscales(std::move(ls)), signal_variance(sv) {
    if (lengthscales.size() == 0 || (lengthscales.array() <= 0.0).any()) {
      throw InvalidArgument("KernelSpec: lengthscales must be positive");
    }
    if (!(signal_variance > 0.0)) {
      throw InvalidArgument("KernelSpec: signal_variance must be positive");
    }
  }

  static KernelSpec isotropic(Eigen::Index dim, double lengthscale,
                              double signal_variance) {
    return KernelSpec(Eigen::VectorXd::Constant(dim, lengthscale),
                      signal_variance);
  }
};

/// Model hyperparameters shared across the estimators.
struct Hyperparams {
  KernelSpec kernel;
  double gamma{0.9};   // discount, in [0, 1]
  double sigma2{0.1};  // TD observation noise variance, > 0
};

double k_eval(const KernelSpec& spec, const StateAction& a,
              const StateAction& b);

/// Element i is k(X_i, x).
Eigen::VectorXd k_vector(const KernelSpec& spec,
                         const std::vector<StateAction>& X,
                         const StateAction& x);

/// Entry (i, j) is k(X_i, Z_j).
Eigen::MatrixXd k_matrix(const KernelSpec& spec,
                         const std::vector<StateAction>& X,
                         const std::vector<StateAction>& Z);

/// TD-differenced kernel vector over a support set S:
/// k_vector(S, x_prev) - gamma * k_vector(S, x_new).
Eigen::VectorXd delta_k_vector(const KernelSpec& spec,
                               const std::vector<StateAction>& S,
                               const StateAction& x_prev,
                               const StateAction& x_new, double gamma);

/// TD-differenced kernel scalar:
/// k(x_prev, x_prev) - 2*gamma*k(x_prev, x_new) + gamma^2*k(x_new, x_new).
/// Nonnegative up to roundoff (it is a squared RKHS norm).
double delta2_k(const KernelSpec& spec, const StateAction& x_prev,
                const StateAction& x_new, double gamma);

}  // namespace spgptd
