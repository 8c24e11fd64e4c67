#include "spgptd/kernel.hpp"

#include <cmath>

namespace spgptd {

namespace {

void check_dim(const KernelSpec& spec, const StateAction& x) {
  if (x.dim() != spec.lengthscales.size()) {
    throw DimensionMismatch("kernel: input dimension " +
                            std::to_string(x.dim()) + " != spec dimension " +
                            std::to_string(spec.lengthscales.size()));
  }
}

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InvalidDiscount("kernel: gamma must lie in [0, 1]");
  }
}

}  // namespace

double k_eval(const KernelSpec& spec, const StateAction& a,
              const StateAction& b) {
  check_dim(spec, a);
  check_dim(spec, b);
  const Eigen::ArrayXd scaled =
      (a.coords() - b.coords()).array() / spec.lengthscales.array();
  return spec.signal_variance * std::exp(-0.5 * scaled.square().sum());
}

Eigen::VectorXd k_vector(const KernelSpec& spec,
                         const std::vector<StateAction>& X,
                         const StateAction& x) {
  if (X.empty()) {
    throw InvalidArgument("k_vector: empty support set");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(X.size()));
  for (std::size_t i = 0; i < X.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = k_eval(spec, X[i], x);
  }
  return out;
}

Eigen::MatrixXd k_matrix(const KernelSpec& spec,
                         const std::vector<StateAction>& X,
                         const std::vector<StateAction>& Z) {
  if (X.empty() || Z.empty()) {
    throw InvalidArgument("k_matrix: empty support set");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(X.size()),
                      static_cast<Eigen::Index>(Z.size()));
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t j = 0; j < Z.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          k_eval(spec, X[i], Z[j]);
    }
  }
  return out;
}

Eigen::VectorXd delta_k_vector(const KernelSpec& spec,
                               const std::vector<StateAction>& S,
                               const StateAction& x_prev,
                               const StateAction& x_new, double gamma) {
  check_gamma(gamma);
  return k_vector(spec, S, x_prev) - gamma * k_vector(spec, S, x_new);
}

double delta2_k(const KernelSpec& spec, const StateAction& x_prev,
                const StateAction& x_new, double gamma) {
  check_gamma(gamma);
  return k_eval(spec, x_prev, x_prev) -
         2.0 * gamma * k_eval(spec, x_prev, x_new) +
         gamma * gamma * k_eval(spec, x_new, x_new);
}

}  // namespace spgptd
