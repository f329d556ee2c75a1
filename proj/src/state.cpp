#include "pfa/state.hpp"

#include <cmath>

#include "pfa/errors.hpp"

namespace pfa {

void ModelState::recompute_tau() {
  tau.resize(delta.size());
  double prod = 1.0;
  for (int i = 0; i < delta.size(); ++i) {
    prod *= delta[i];
    tau[i] = prod;
  }
}

void ModelState::validate() const {
  if ((e.array() <= 0.0).any())
    throw NumericalError("factor variances must stay strictly positive");
  if ((sigma2.array() <= 0.0).any())
    throw NumericalError("residual variances must stay strictly positive");
  if (!(alpha > 0.0)) throw NumericalError("alpha must stay strictly positive");
  double prod = 1.0;
  for (int i = 0; i < delta.size(); ++i) {
    prod *= delta[i];
    if (std::abs(tau[i] - prod) > 1e-12 * std::abs(prod))
      throw NumericalError("tau is not the running product of delta");
  }
  if (mode == PerturbationMode::Group && !Q.empty()) {
    if (!Q[0].isIdentity(0.0))
      throw NumericalError("Q[1] must remain exactly the identity");
  }
}

Eigen::MatrixXd shared_covariance(const ModelState& state) {
  Eigen::MatrixXd H =
      state.Lambda * state.e.asDiagonal() * state.Lambda.transpose();
  H.diagonal() += state.sigma2;
  return H;
}

Eigen::MatrixXd invert_checked(const Eigen::MatrixXd& m,
                               const std::string& label) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-12))
    throw NumericalError("numerically singular perturbation matrix for " +
                         label + " (condition estimate " +
                         std::to_string(rcond > 0 ? 1.0 / rcond : INFINITY) +
                         ")");
  return lu.inverse();
}

Eigen::MatrixXd group_marginal_covariance(const ModelState& state, int j) {
  const Eigen::MatrixXd Qinv =
      invert_checked(state.Q.at(j), "group " + std::to_string(j + 1));
  const Eigen::MatrixXd H = shared_covariance(state);
  Eigen::MatrixXd C = Qinv * H * Qinv.transpose();
  return (C + C.transpose()) / 2.0;  // exact symmetry
}

double perturbation_magnitude(const ModelState& state, int j) {
  const Eigen::MatrixXd Qinv =
      invert_checked(state.Q.at(j), "group " + std::to_string(j + 1));
  const int p = state.p();
  return (Qinv - Eigen::MatrixXd::Identity(p, p)).norm();
}

Eigen::MatrixXd PosteriorChain::mean_shared_cov() const {
  return sum_shared_cov / std::max(1, n_accum);
}

std::vector<Eigen::MatrixXd> PosteriorChain::mean_Q() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(sum_Q.size());
  for (const auto& m : sum_Q) out.push_back(m / std::max(1, n_accum));
  return out;
}

std::vector<Eigen::MatrixXd> PosteriorChain::mean_Qinv() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(sum_Qinv.size());
  for (const auto& m : sum_Qinv) out.push_back(m / std::max(1, n_accum));
  return out;
}

}  // namespace pfa
