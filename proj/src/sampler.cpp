#include "pfa/sampler.hpp"

#include <cmath>
#include <string>

#include "pfa/errors.hpp"
#include "pfa/mvn.hpp"
#include "pfa/priors.hpp"

namespace pfa {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ModelState init_state(const Dataset& data, const SamplerConfig& config,
                      Rng& rng) {
  const int p = data.p(), n = data.n();
  const auto& hy = config.hyper;
  const int k = std::min(hy.k_init, p);

  ModelState st;
  st.mode = config.mode;
  MgpDraw mgp = draw_mgp_loadings(hy, p, k, rng);
  st.Lambda = std::move(mgp.Lambda);
  st.phi = std::move(mgp.phi);
  // start the shrinkage ladder at its prior mean: deep columns begin in the
  // crushed regime instead of wherever a single gamma draw lands them
  st.delta.resize(k);
  st.delta[0] = hy.kappa1;
  for (int i = 1; i < k; ++i) st.delta[i] = hy.kappa2;
  st.recompute_tau();
  for (int c = 0; c < k; ++c)
    st.Lambda.col(c) *= std::sqrt(mgp.tau[c] / st.tau[c]);
  st.e = VectorXd::Ones(k);
  st.sigma2 = VectorXd::Ones(p);
  st.alpha = hy.alpha_mode == AlphaMode::Fixed ? hy.alpha : 1e-2;
  if (config.mode == PerturbationMode::Group)
    st.Q.assign(data.n_groups(), MatrixXd::Identity(p, p));
  else if (config.mode == PerturbationMode::Observation)
    st.Q.assign(n, MatrixXd::Identity(p, p));
  st.eta.resize(n, k);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int h = 0; h < k; ++h) {
    const double sd = std::sqrt(st.e[h]);
    for (int i = 0; i < n; ++i) st.eta(i, h) = sd * z(rng);
  }
  return st;
}

double state_loglik(const ModelState& state, const MatrixXd& W) {
  return lowrank_mvn_loglik(W, state.Lambda, state.e, state.sigma2).sum();
}

namespace {

void check_finite(const MatrixXd& m, int iter, const char* block) {
  if (!m.allFinite())
    throw NumericalError("non-finite values after block '" +
                         std::string(block) + "' at iteration " +
                         std::to_string(iter + 1));
}

void accumulate(PosteriorChain& chain, const ModelState& st,
                const SamplerConfig& config) {
  Draw d;
  d.Lambda = st.Lambda;
  d.e = st.e;
  d.sigma2 = st.sigma2;
  d.alpha = st.alpha;
  d.k = st.k();
  if (config.store_q) d.Q = st.Q;
  if (config.store_eta) d.eta = st.eta;
  chain.draws.push_back(std::move(d));

  const int p = st.p();
  if (chain.n_accum == 0) {
    chain.sum_shared_cov = MatrixXd::Zero(p, p);
    if (st.mode == PerturbationMode::Group) {
      chain.sum_Q.assign(st.Q.size(), MatrixXd::Zero(p, p));
      chain.sum_Qinv.assign(st.Q.size(), MatrixXd::Zero(p, p));
      chain.sum_divergence =
          MatrixXd::Zero(st.Q.size(), st.Q.size());
    }
  }
  chain.sum_shared_cov += shared_covariance(st);
  chain.sum_alpha += st.alpha;
  if (st.mode == PerturbationMode::Group) {
    const int J = static_cast<int>(st.Q.size());
    VectorXd inv_norm2(J);
    for (int j = 0; j < J; ++j) {
      chain.sum_Q[j] += st.Q[j];
      const MatrixXd qinv =
          invert_checked(st.Q[j], "group " + std::to_string(j + 1));
      chain.sum_Qinv[j] += qinv;
      inv_norm2[j] = qinv.squaredNorm();
    }
    for (int j = 0; j < J; ++j)
      for (int l = 0; l < J; ++l)
        if (j != l)
          chain.sum_divergence(j, l) += std::sqrt(
              std::abs(inv_norm2[j] - inv_norm2[l]) / (double(p) * p));
  }
  ++chain.n_accum;
}

}  // namespace

PosteriorChain run_chain(const Dataset& data, const SamplerConfig& config) {
  data.validate();
  config.validate(data.p());
  if (!data.centered)
    throw DataError("run_chain expects a centered dataset");
  const auto& hy = config.hyper;

  Rng rng(hy.seed);
  ModelState st = init_state(data, config, rng);
  MatrixXd W = kernels::perturbed_data(st, data);

  PosteriorChain chain;
  chain.meta.hyper = hy;
  chain.meta.mode = config.mode;
  chain.meta.group_names = data.group_names;
  chain.meta.seed = hy.seed;
  chain.meta.n_iter = hy.n_iter;
  chain.meta.burn_in = hy.burn_in;
  chain.meta.store_q = config.store_q;
  chain.meta.fix_factor_variance = config.fix_factor_variance;
  chain.meta.backend = config.backend;
  if (config.compute_loglik_trace)
    chain.meta.loglik_trace.resize(hy.n_iter);
  chain.meta.rank_trace.reserve(hy.n_iter);
  chain.draws.reserve(hy.n_iter - hy.burn_in);

  const Backend backend = config.backend;
  for (int iter = 0; iter < hy.n_iter; ++iter) {
    kernels::update_factors(st, data, W, rng, backend);
    check_finite(st.eta, iter, "factors");
    kernels::update_loadings(st, data, W, rng, backend);
    check_finite(st.Lambda, iter, "loadings");
    kernels::update_local_shrinkage(st, hy, rng, backend);
    check_finite(st.phi, iter, "local shrinkage");
    kernels::update_column_shrinkage(st, hy, rng);
    check_finite(st.delta, iter, "column shrinkage");
    kernels::update_residual_variance(st, data, W, hy, rng, backend);
    check_finite(st.sigma2, iter, "residual variance");
    if (!config.fix_factor_variance) {
      kernels::update_factor_variance(st, hy, rng);
      check_finite(st.e, iter, "factor variance");
    }
    if (config.mode == PerturbationMode::Group && data.n_groups() > 1) {
      kernels::update_perturbations_group(st, data, W, rng, backend);
      check_finite(W, iter, "perturbations");
    } else if (config.mode == PerturbationMode::Observation) {
      kernels::update_perturbations_observation(st, data, W, rng, backend);
      check_finite(W, iter, "perturbations");
    }
    if (hy.alpha_mode == AlphaMode::Learned &&
        config.mode != PerturbationMode::None) {
      kernels::update_alpha(st, hy, rng);
      if (!std::isfinite(st.alpha))
        throw NumericalError("non-finite alpha at iteration " +
                             std::to_string(iter + 1));
    }
    if (iter < hy.burn_in)
      kernels::adapt_rank(st, hy, iter, rng, config.fix_factor_variance);

    if (config.compute_loglik_trace) {
      const double ll = state_loglik(st, W);
      if (!std::isfinite(ll))
        throw NumericalError("non-finite log-likelihood at iteration " +
                             std::to_string(iter + 1));
      chain.meta.loglik_trace[iter] = ll;
    }
    chain.meta.rank_trace.push_back(st.k());

    if (iter >= hy.burn_in) accumulate(chain, st, config);
  }
  return chain;
}

}  // namespace pfa
