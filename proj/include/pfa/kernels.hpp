#pragma once

#include <Eigen/Dense>

#include "pfa/dataset.hpp"
#include "pfa/rng.hpp"
#include "pfa/state.hpp"

// Full-conditional updates. Each update draws its noise from `rng` up front
// in a fixed order and then runs either the serial reference implementation
// (straightforward per-item formulas, kept for testing) or the OpenMP kernel.
// Both backends consume the same random numbers, so they differ only by
// floating-point reassociation in the shared precomputations.
namespace pfa::kernels {

// W: perturbed data, rows W_i = Q_{g(i)} Y_i (group mode), Q_i Y_i
// (observation mode) or Y_i (mode None).
Eigen::MatrixXd perturbed_data(const ModelState& state, const Dataset& data);

// eta_i ~ N(A^{-1} Lambda^T Sigma^{-1} W_i, A^{-1}),
// A = Lambda^T Sigma^{-1} Lambda + E^{-1}.
void update_factors(ModelState& state, const Dataset& data,
                    const Eigen::MatrixXd& W, Rng& rng, Backend backend);

// Row l of Lambda ~ N(C^{-1} b, C^{-1}),
// C = diag(phi_l * tau) + sigma2_l^{-1} sum_i eta_i eta_i^T,
// b = sigma2_l^{-1} sum_i eta_i W_il.
void update_loadings(ModelState& state, const Dataset& data,
                     const Eigen::MatrixXd& W, Rng& rng, Backend backend);

// phi_lk ~ Gamma(nu1 + 1/2, nu1 + tau_k lambda_lk^2 / 2)
void update_local_shrinkage(ModelState& state, const Hyperparameters& hyper,
                            Rng& rng, Backend backend);

// delta_1 ~ Gamma(kappa1 + p k / 2, 1 + ...), delta_m ~ Gamma(kappa2 + ..., ...)
// with products excluding the updated element; tau recomputed.
void update_column_shrinkage(ModelState& state, const Hyperparameters& hyper,
                             Rng& rng);

// sigma2_l ~ IG(a_sigma + n/2, b_sigma + sum residuals^2 / 2) in the
// perturbed scale.
void update_residual_variance(ModelState& state, const Dataset& data,
                              const Eigen::MatrixXd& W,
                              const Hyperparameters& hyper, Rng& rng,
                              Backend backend);

// e_h ~ IG(u + n/2, b_e + sum_i eta_ih^2 / 2)
void update_factor_variance(ModelState& state, const Hyperparameters& hyper,
                            Rng& rng);

// Joint vec(Q_j) draw from the exact p^2-dimensional conditional Gaussian.
// O(p^6); kept as the test oracle for the column sweep.
void update_perturbation_joint(ModelState& state, const Dataset& data, int j,
                               Rng& rng);

// Column sweep for group j (production path): each column redrawn from its
// independent-row conditional, no matrix inversion.
void update_perturbation_columns(ModelState& state, const Dataset& data, int j,
                                 Rng& rng);

// Sweeps all groups j >= 1 (group mode) and refreshes the affected W rows.
void update_perturbations_group(ModelState& state, const Dataset& data,
                                Eigen::MatrixXd& W, Rng& rng, Backend backend);

// Column sweep for the perturbation of a single observation.
void update_perturbation_observation(ModelState& state, const Dataset& data,
                                     int i, Rng& rng);

// All per-observation perturbations; refreshes W.
void update_perturbations_observation(ModelState& state, const Dataset& data,
                                      Eigen::MatrixXd& W, Rng& rng,
                                      Backend backend);

// alpha ~ IG(a + N p^2 / 2, b + sum ||Q - I||_F^2 / 2) over the N sampled
// perturbation matrices.
void update_alpha(ModelState& state, const Hyperparameters& hyper, Rng& rng);

// With probability exp(c0 + c1 * iteration): delete columns whose loadings
// all lie in [-zeta, zeta] (never below k = 1), else append a prior-drawn
// column while k < p. Returns true if k changed. fix_factor_variance keeps
// appended factor variances at 1 (B&D special case).
bool adapt_rank(ModelState& state, const Hyperparameters& hyper, int iteration,
                Rng& rng, bool fix_factor_variance = false);

}  // namespace pfa::kernels
