#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pfa/hyper.hpp"

namespace pfa {

// One Gibbs state. Sigma and e hold variances (diagonals of the residual and
// factor covariance matrices). In group mode Q has one matrix per group and
// Q[0] stays the identity; in observation mode one matrix per observation;
// empty in mode None.
struct ModelState {
  Eigen::MatrixXd Lambda;        // p x k loadings
  Eigen::VectorXd e;             // k factor variances
  Eigen::VectorXd sigma2;        // p residual variances
  std::vector<Eigen::MatrixXd> Q;
  Eigen::MatrixXd eta;           // n x k factor scores
  Eigen::MatrixXd phi;           // p x k local shrinkage
  Eigen::VectorXd delta;         // k column shrinkage increments
  Eigen::VectorXd tau;           // running products of delta
  double alpha = 1e-4;
  PerturbationMode mode = PerturbationMode::None;

  int p() const { return static_cast<int>(Lambda.rows()); }
  int k() const { return static_cast<int>(Lambda.cols()); }
  int n() const { return static_cast<int>(eta.rows()); }

  void recompute_tau();
  // Checks tau consistency, positivity of e/sigma2/alpha, Q[0] == I in group
  // mode. Throws NumericalError on violation.
  void validate() const;
};

// H = Lambda E Lambda^T + Sigma, the covariance of perturbed data QY.
Eigen::MatrixXd shared_covariance(const ModelState& state);

// Q_j^{-1} H Q_j^{-T}: marginal covariance of group j observations.
Eigen::MatrixXd group_marginal_covariance(const ModelState& state, int j);

// ||Q_j^{-1} - I||_F, the perturbation magnitude of group j.
double perturbation_magnitude(const ModelState& state, int j);

// LU inverse with a condition estimate; throws NumericalError naming `label`
// when the condition number exceeds 1e12.
Eigen::MatrixXd invert_checked(const Eigen::MatrixXd& m, const std::string& label);

struct Draw {
  Eigen::MatrixXd Lambda;
  Eigen::VectorXd e;
  Eigen::VectorXd sigma2;
  double alpha = 0.0;
  int k = 0;
  std::vector<Eigen::MatrixXd> Q;  // only when store_q
  Eigen::MatrixXd eta;             // only when store_eta
};

struct ChainMeta {
  Hyperparameters hyper;
  PerturbationMode mode = PerturbationMode::None;
  std::vector<std::string> group_names;  // training groups, fit order
  std::uint64_t seed = 0;
  int n_iter = 0;
  int burn_in = 0;
  bool store_q = false;
  bool fix_factor_variance = false;
  Backend backend = Backend::Parallel;
  Eigen::VectorXd loglik_trace;       // per-iteration training log-likelihood
  std::vector<int> rank_trace;        // per-iteration k
  std::string loglik_convention =
      "sum over points of log(mean over draws of density)";
};

// Post-burn-in draws plus running accumulators (posterior means that do not
// require storing every Q draw).
struct PosteriorChain {
  std::vector<Draw> draws;
  ChainMeta meta;

  int n_accum = 0;
  Eigen::MatrixXd sum_shared_cov;          // sum of H over draws
  std::vector<Eigen::MatrixXd> sum_Q;      // group mode
  std::vector<Eigen::MatrixXd> sum_Qinv;
  Eigen::MatrixXd sum_divergence;          // J x J, per-draw d accumulated
  double sum_alpha = 0.0;

  Eigen::MatrixXd mean_shared_cov() const;
  std::vector<Eigen::MatrixXd> mean_Q() const;
  std::vector<Eigen::MatrixXd> mean_Qinv() const;
};

}  // namespace pfa
