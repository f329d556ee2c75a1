#pragma once

#include "pfa/dataset.hpp"
#include "pfa/kernels.hpp"
#include "pfa/state.hpp"

namespace pfa {

// Runs the Gibbs chain: factors, loadings, local shrinkage, column shrinkage,
// residual variance, factor variance, perturbations (mode-dependent), alpha
// (learned mode), rank adaptation (burn-in only). Deterministic in
// (data, config): identical seeds give bit-identical chains.
PosteriorChain run_chain(const Dataset& data, const SamplerConfig& config);

// Initial state drawn from the priors with Q = I and unit variances.
ModelState init_state(const Dataset& data, const SamplerConfig& config, Rng& rng);

// Training log-likelihood of the current state (used for the per-iteration
// trace): sum over observations of log N(W_i; 0, H).
double state_loglik(const ModelState& state, const Eigen::MatrixXd& W);

}  // namespace pfa
