#include "spgptd/tdmodel.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace spgptd {

BellmanMatrix::BellmanMatrix(Eigen::Index t, double gamma,
                             std::vector<bool> terminal_rows)
    : rows_(t - 1), gamma_(gamma), terminal_(std::move(terminal_rows)) {
  if (t < 2) {
    throw InvalidShape("BellmanMatrix: need at least two inputs");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InvalidDiscount("BellmanMatrix: gamma must lie in [0, 1]");
  }
  if (terminal_.empty()) {
    terminal_.assign(static_cast<std::size_t>(rows_), false);
  }
  if (terminal_.size() != static_cast<std::size_t>(rows_)) {
    throw InvalidShape("BellmanMatrix: terminal flag count must equal t - 1");
  }
}

Eigen::MatrixXd BellmanMatrix::apply(const Eigen::MatrixXd& M) const {
  if (M.rows() != cols()) {
    throw ShapeMismatch("BellmanMatrix::apply: matrix has " +
                        std::to_string(M.rows()) + " rows, expected " +
                        std::to_string(cols()));
  }
  Eigen::MatrixXd out(rows_, M.cols());
  for (Eigen::Index i = 0; i < rows_; ++i) {
    out.row(i) = M.row(i) - row_gamma(i) * M.row(i + 1);
  }
  return out;
}

Eigen::VectorXd BellmanMatrix::apply(const Eigen::VectorXd& v) const {
  if (v.size() != cols()) {
    throw ShapeMismatch("BellmanMatrix::apply: vector has " +
                        std::to_string(v.size()) + " entries, expected " +
                        std::to_string(cols()));
  }
  Eigen::VectorXd out(rows_);
  for (Eigen::Index i = 0; i < rows_; ++i) {
    out(i) = v(i) - row_gamma(i) * v(i + 1);
  }
  return out;
}

Eigen::MatrixXd BellmanMatrix::dense() const {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(rows_, cols());
  for (Eigen::Index i = 0; i < rows_; ++i) {
    H(i, i) = 1.0;
    H(i, i + 1) = -row_gamma(i);
  }
  return H;
}

TransitionDataset::TransitionDataset(double gamma, double sigma2,
                                     StateAction first_input)
    : gamma_(gamma), sigma2_(sigma2) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InvalidDiscount("TransitionDataset: gamma must lie in [0, 1]");
  }
  if (!(sigma2 > 0.0)) {
    throw InvalidArgument("TransitionDataset: sigma2 must be positive");
  }
  inputs_.push_back(std::move(first_input));
}

void TransitionDataset::add_transition(double reward, StateAction next_input,
                                       bool terminal) {
  if (!std::isfinite(reward)) {
    throw InvalidArgument("TransitionDataset: reward must be finite");
  }
  if (next_input.dim() != inputs_.front().dim()) {
    throw DimensionMismatch("TransitionDataset: inconsistent input dimension");
  }
  inputs_.push_back(std::move(next_input));
  rewards_.push_back(reward);
  terminal_.push_back(terminal);
}

Eigen::VectorXd TransitionDataset::reward_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(
      rewards_.data(), static_cast<Eigen::Index>(rewards_.size()));
}

BellmanMatrix TransitionDataset::bellman() const {
  return BellmanMatrix(t(), gamma_, terminal_);
}

void TransitionDataset::write_csv(std::ostream& os) const {
  const Eigen::Index dim = inputs_.front().dim();
  for (Eigen::Index d = 0; d < dim; ++d) {
    os << 'x' << d << ',';
  }
  os << "reward,terminal\n";
  os.precision(17);
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      os << inputs_[i].coords()(d) << ',';
    }
    if (i < rewards_.size()) {
      os << rewards_[i] << ',' << (terminal_[i] ? 1 : 0);
    } else {
      os << ',';  // final input: no outgoing transition
    }
    os << '\n';
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    fields.emplace_back();
  }
  return fields;
}

}  // namespace

TransitionDataset TransitionDataset::read_csv(std::istream& is, double gamma,
                                              double sigma2) {
  std::string line;
  Eigen::Index dim = -1;
  std::vector<Eigen::VectorXd> coords;
  std::vector<double> rewards;
  std::vector<bool> terminal;

  while (std::getline(is, line)) {
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto fields = split_csv_line(line);
    if (dim < 0) {  // header
      if (fields.size() < 3 || fields[0] != "x0") {
        throw InvalidArgument("TransitionDataset: malformed CSV header");
      }
      dim = static_cast<Eigen::Index>(fields.size()) - 2;
      continue;
    }
    if (fields.size() != static_cast<std::size_t>(dim) + 2) {
      throw InvalidArgument("TransitionDataset: malformed CSV record");
    }
    Eigen::VectorXd c(dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
      c(d) = std::stod(fields[static_cast<std::size_t>(d)]);
    }
    coords.push_back(std::move(c));
    const std::string& reward_field = fields[static_cast<std::size_t>(dim)];
    if (!reward_field.empty()) {
      rewards.push_back(std::stod(reward_field));
      terminal.push_back(
          std::stoi(fields[static_cast<std::size_t>(dim) + 1]) != 0);
    }
  }
  if (coords.empty()) {
    throw InvalidArgument("TransitionDataset: empty CSV");
  }
  if (rewards.size() + 1 != coords.size()) {
    throw InvalidArgument(
        "TransitionDataset: record count mismatch (need exactly one "
        "rewardless final input)");
  }

  TransitionDataset out(gamma, sigma2, StateAction(coords.front()));
  for (std::size_t i = 0; i + 1 < coords.size(); ++i) {
    out.add_transition(rewards[i], StateAction(coords[i + 1]), terminal[i]);
  }
  return out;
}

TdGram::TdGram(const TransitionDataset& dataset, const KernelSpec& spec)
    : inputs_(dataset.inputs()), H_(dataset.bellman()), spec_(spec) {
  const Eigen::MatrixXd K_tt = k_matrix(spec_, inputs_, inputs_);
  // H K H^T, band-applied from each side
  K_rr_ = H_.apply(Eigen::MatrixXd(H_.apply(K_tt).transpose()));
  K_rr_ = 0.5 * (K_rr_ + K_rr_.transpose()).eval();
}

Eigen::VectorXd TdGram::k_r_star(const StateAction& x_star) const {
  return H_.apply(k_vector(spec_, inputs_, x_star));
}

}  // namespace spgptd
