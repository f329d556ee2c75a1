#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pfa/dataset.hpp"
#include "pfa/hyper.hpp"
#include "pfa/state.hpp"

namespace pfa {

struct PredictiveLoglik {
  double total = 0.0;      // sum over test points of log posterior-mixture density
  double per_point = 0.0;
  int n_points = 0;
  int n_draws = 0;
  std::string convention;
};

// Held-out log-likelihood averaged over posterior draws (density averaged per
// point, then logs summed). Group mode evaluates N(0, H) at Q_j Y and needs
// stored Q draws; observation mode evaluates N(0, alpha * tr(H) I + H) at Y;
// mode None evaluates N(0, H) at Y. `thin` keeps every thin-th draw.
PredictiveLoglik predictive_loglik(const PosteriorChain& chain,
                                   const Dataset& testset, int thin = 1);

// Same evaluation for a single state (used by oracles and the trace).
double predictive_loglik_state(const ModelState& state, const Dataset& testset);

struct CvRow {
  double alpha;
  int split;
  double loglik;
};

struct CvResult {
  double chosen_alpha = 0.0;
  std::vector<CvRow> table;
  std::vector<double> grid;
  std::vector<double> mean_loglik;  // per grid point
  std::vector<double> se_loglik;
  double tie_tolerance = 0.0;
};

// 50-50 within-group splits; for each alpha the model is fit on each training
// half and scored on the matching test half; ties within tie_tolerance of the
// best mean resolve to the smallest alpha. tie_tolerance <= 0 selects the
// default of 2 standard errors of the best alpha's split-wise mean.
CvResult cv_alpha(const Dataset& data, const std::vector<double>& alpha_grid,
                  int n_splits, const SamplerConfig& config,
                  double tie_tolerance = -1.0);

struct DivergenceMatrix {
  Eigen::MatrixXd d;             // J x J, from posterior-mean Q
  Eigen::MatrixXd edge_weights;  // 60 / d_jl off the diagonal
  Eigen::MatrixXd d_per_draw;    // mean over draws of the per-draw statistic
};

// d_jl = sqrt(| ||Q_j^{-1}||_F^2 - ||Q_l^{-1}||_F^2 | / p^2) evaluated at the
// posterior-mean perturbations; the per-draw average is reported alongside.
DivergenceMatrix divergence_matrix(const PosteriorChain& chain);

// Exact KL divergence between the two group marginals N(0, C_j), N(0, C_l).
double kl_group_marginals(const ModelState& state, int j, int l);

// Mean squared entrywise difference.
double covariance_mse(const Eigen::MatrixXd& estimate,
                      const Eigen::MatrixXd& truth);

// Two-sample Hotelling T^2 with pooled covariance.
double hotelling_t2(const Dataset& data, int j, int l);

}  // namespace pfa
