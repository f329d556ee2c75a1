#include "pfa/kernels.hpp"

#include <cmath>
#include <vector>

#include "pfa/errors.hpp"
#include "pfa/priors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pfa::kernels {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Draw from N(mean, Prec^{-1}) given chol(Prec) = L L^T and z ~ N(0, I):
// x = mean + L^{-T} z. Both backends use this transport so that equal inputs
// give equal draws.
VectorXd gaussian_from_precision(const Eigen::LLT<MatrixXd>& llt,
                                 const VectorXd& b, const VectorXd& z) {
  VectorXd mean = llt.solve(b);
  return mean + llt.matrixU().solve(z);
}

}  // namespace

MatrixXd perturbed_data(const ModelState& state, const Dataset& data) {
  const int n = data.n();
  switch (state.mode) {
    case PerturbationMode::None:
      return data.values;
    case PerturbationMode::Group: {
      MatrixXd W(n, data.p());
      for (int i = 0; i < n; ++i)
        W.row(i) = (state.Q[data.group[i]] * data.values.row(i).transpose())
                       .transpose();
      return W;
    }
    case PerturbationMode::Observation: {
      MatrixXd W(n, data.p());
      for (int i = 0; i < n; ++i)
        W.row(i) = (state.Q[i] * data.values.row(i).transpose()).transpose();
      return W;
    }
  }
  return data.values;
}

// ---------------------------------------------------------------------------
// factors

namespace {

void factors_parallel(ModelState& state, const MatrixXd& W, const MatrixXd& Z) {
  const int n = state.n();
  const VectorXd sinv = state.sigma2.cwiseInverse();
  const MatrixXd B = state.Lambda.transpose() * sinv.asDiagonal();  // k x p
  MatrixXd A = B * state.Lambda;
  A.diagonal() += state.e.cwiseInverse();
  const Eigen::LLT<MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw NumericalError("factor update: precision not positive definite");
  const MatrixXd Bt = B * W.transpose();  // k x n
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    state.eta.row(i) =
        gaussian_from_precision(llt, Bt.col(i), Z.row(i).transpose())
            .transpose();
  }
}

void factors_serial(ModelState& state, const MatrixXd& W, const MatrixXd& Z) {
  const int n = state.n(), p = state.p(), k = state.k();
  for (int i = 0; i < n; ++i) {
    MatrixXd A = MatrixXd::Zero(k, k);
    VectorXd b = VectorXd::Zero(k);
    for (int a = 0; a < p; ++a) {
      const double w = 1.0 / state.sigma2[a];
      for (int r = 0; r < k; ++r) {
        for (int c = 0; c < k; ++c)
          A(r, c) += state.Lambda(a, r) * w * state.Lambda(a, c);
        b[r] += state.Lambda(a, r) * w * W(i, a);
      }
    }
    for (int r = 0; r < k; ++r) A(r, r) += 1.0 / state.e[r];
    const Eigen::LLT<MatrixXd> llt(A);
    state.eta.row(i) =
        gaussian_from_precision(llt, b, Z.row(i).transpose()).transpose();
  }
}

}  // namespace

void update_factors(ModelState& state, const Dataset& data, const MatrixXd& W,
                    Rng& rng, Backend backend) {
  (void)data;
  MatrixXd Z(state.n(), state.k());
  rng.fill_normal(Z.data(), Z.size());
  if (backend == Backend::Parallel)
    factors_parallel(state, W, Z);
  else
    factors_serial(state, W, Z);
}

// ---------------------------------------------------------------------------
// loadings

namespace {

void loadings_parallel(ModelState& state, const MatrixXd& W, const MatrixXd& Z) {
  const int p = state.p();
  const MatrixXd G = state.eta.transpose() * state.eta;   // k x k
  const MatrixXd bmat = state.eta.transpose() * W;        // k x p
#pragma omp parallel for schedule(static)
  for (int l = 0; l < p; ++l) {
    const double w = 1.0 / state.sigma2[l];
    MatrixXd C = G * w;
    C.diagonal() +=
        (state.phi.row(l).transpose().array() * state.tau.array()).matrix();
    const Eigen::LLT<MatrixXd> llt(C);
    state.Lambda.row(l) =
        gaussian_from_precision(llt, bmat.col(l) * w, Z.row(l).transpose())
            .transpose();
  }
}

void loadings_serial(ModelState& state, const MatrixXd& W, const MatrixXd& Z) {
  const int p = state.p(), k = state.k(), n = state.n();
  for (int l = 0; l < p; ++l) {
    const double w = 1.0 / state.sigma2[l];
    MatrixXd C = MatrixXd::Zero(k, k);
    VectorXd b = VectorXd::Zero(k);
    for (int i = 0; i < n; ++i) {
      for (int r = 0; r < k; ++r) {
        for (int c = 0; c < k; ++c)
          C(r, c) += state.eta(i, r) * state.eta(i, c) * w;
        b[r] += state.eta(i, r) * W(i, l) * w;
      }
    }
    for (int r = 0; r < k; ++r) C(r, r) += state.phi(l, r) * state.tau[r];
    const Eigen::LLT<MatrixXd> llt(C);
    state.Lambda.row(l) =
        gaussian_from_precision(llt, b, Z.row(l).transpose()).transpose();
  }
}

}  // namespace

void update_loadings(ModelState& state, const Dataset& data, const MatrixXd& W,
                     Rng& rng, Backend backend) {
  (void)data;
  MatrixXd Z(state.p(), state.k());
  rng.fill_normal(Z.data(), Z.size());
  if (backend == Backend::Parallel)
    loadings_parallel(state, W, Z);
  else
    loadings_serial(state, W, Z);
}

// ---------------------------------------------------------------------------
// shrinkage

void update_local_shrinkage(ModelState& state, const Hyperparameters& hyper,
                            Rng& rng, Backend backend) {
  const int p = state.p(), k = state.k();
  // Gamma(shape, rate) = Gamma(shape, 1) / rate; the shape is shared, so the
  // unit-rate draws are taken up front and scaled per entry.
  MatrixXd G(p, k);
  const double shape = hyper.nu1 + 0.5;
  for (int c = 0; c < k; ++c)
    for (int r = 0; r < p; ++r) G(r, c) = rng.gamma_rate(shape, 1.0);
  if (backend == Backend::Parallel) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < k; ++c)
      state.phi.col(c) =
          G.col(c).array() /
          (hyper.nu1 +
           0.5 * state.tau[c] * state.Lambda.col(c).array().square());
  } else {
    for (int c = 0; c < k; ++c)
      for (int r = 0; r < p; ++r)
        state.phi(r, c) =
            G(r, c) / (hyper.nu1 + 0.5 * state.tau[c] * state.Lambda(r, c) *
                                       state.Lambda(r, c));
  }
}

void update_column_shrinkage(ModelState& state, const Hyperparameters& hyper,
                             Rng& rng) {
  const int p = state.p(), k = state.k();
  // M_h = sum_l phi_lh lambda_lh^2
  VectorXd M(k);
  for (int h = 0; h < k; ++h)
    M[h] = (state.phi.col(h).array() *
            state.Lambda.col(h).array().square())
               .sum();
  for (int m = 0; m < k; ++m) {
    const double shape =
        (m == 0 ? hyper.kappa1 : hyper.kappa2) + 0.5 * p * (k - m);
    double rate = 1.0;
    for (int h = m; h < k; ++h) {
      double prod = 1.0;  // tau_h with delta_m left out
      for (int t = 0; t <= h; ++t)
        if (t != m) prod *= state.delta[t];
      rate += 0.5 * prod * M[h];
    }
    state.delta[m] = rng.gamma_rate(shape, rate);
  }
  state.recompute_tau();
}

// ---------------------------------------------------------------------------
// variances

void update_residual_variance(ModelState& state, const Dataset& data,
                              const MatrixXd& W, const Hyperparameters& hyper,
                              Rng& rng, Backend backend) {
  (void)data;
  const int p = state.p(), n = state.n();
  VectorXd G(p);
  const double shape = hyper.a_sigma + 0.5 * n;
  for (int l = 0; l < p; ++l) G[l] = rng.gamma_rate(shape, 1.0);
  if (backend == Backend::Parallel) {
    const MatrixXd R = W - state.eta * state.Lambda.transpose();
#pragma omp parallel for schedule(static)
    for (int l = 0; l < p; ++l) {
      const double rate = hyper.b_sigma + 0.5 * R.col(l).squaredNorm();
      state.sigma2[l] = rate / G[l];
    }
  } else {
    for (int l = 0; l < p; ++l) {
      double ss = 0.0;
      for (int i = 0; i < n; ++i) {
        double r = W(i, l);
        for (int h = 0; h < state.k(); ++h)
          r -= state.Lambda(l, h) * state.eta(i, h);
        ss += r * r;
      }
      state.sigma2[l] = (hyper.b_sigma + 0.5 * ss) / G[l];
    }
  }
}

void update_factor_variance(ModelState& state, const Hyperparameters& hyper,
                            Rng& rng) {
  const int n = state.n();
  for (int h = 0; h < state.k(); ++h) {
    const double rate = hyper.b_e + 0.5 * state.eta.col(h).squaredNorm();
    state.e[h] = draw_inverse_gamma(hyper.u + 0.5 * n, rate, rng);
  }
}

// ---------------------------------------------------------------------------
// perturbations

namespace {

// Indices of the rows whose perturbation matrix is `which` (a group or a
// single observation).
struct PerturbTarget {
  std::vector<int> rows;
  int q_index;
};

// One full column sweep of Q given its conditioning set. Incremental
// residual bookkeeping: Cres_k = Lambda eta_k - Q Y_k is updated after every
// column draw. Z holds the p x p pre-drawn standard normals (column order).
void sweep_columns_fast(MatrixXd& Q, const MatrixXd& Yg, const MatrixXd& Meta,
                        const VectorXd& sigma2, double alpha,
                        const MatrixXd& Z) {
  const int p = static_cast<int>(Q.rows());
  MatrixXd Cres = Meta - Yg * Q.transpose();  // n_g x p
  const VectorXd sinv = sigma2.cwiseInverse();
  for (int l = 0; l < p; ++l) {
    const double s_l = Yg.col(l).squaredNorm();
    const VectorXd q_old = Q.col(l);
    const VectorXd t = Cres.transpose() * Yg.col(l);
    const VectorXd u = t + q_old * s_l;
    VectorXd V = (sinv * s_l).array() + 1.0 / alpha;
    V = V.cwiseInverse();
    VectorXd mean = V.cwiseProduct(u.cwiseProduct(sinv));
    mean[l] += V[l] / alpha;
    const VectorXd q_new = mean + V.cwiseSqrt().cwiseProduct(Z.col(l));
    Cres.noalias() -= Yg.col(l) * (q_new - q_old).transpose();
    Q.col(l) = q_new;
  }
}

// Reference sweep: every column conditional is rebuilt from scratch.
void sweep_columns_reference(MatrixXd& Q, const MatrixXd& Yg,
                             const MatrixXd& Meta, const VectorXd& sigma2,
                             double alpha, const MatrixXd& Z) {
  const int p = static_cast<int>(Q.rows());
  const int ng = static_cast<int>(Yg.rows());
  for (int l = 0; l < p; ++l) {
    for (int a = 0; a < p; ++a) {
      double sum_sq = 0.0, sum_cross = 0.0;
      for (int kk = 0; kk < ng; ++kk) {
        double rest = 0.0;  // (Q_{-l} Y_{-l,k})_a
        for (int b = 0; b < p; ++b)
          if (b != l) rest += Q(a, b) * Yg(kk, b);
        sum_sq += Yg(kk, l) * Yg(kk, l);
        sum_cross += Yg(kk, l) * (Meta(kk, a) - rest);
      }
      const double V = 1.0 / (sum_sq / sigma2[a] + 1.0 / alpha);
      const double mean =
          V * (sum_cross / sigma2[a] + (a == l ? 1.0 / alpha : 0.0));
      Q(a, l) = mean + std::sqrt(V) * Z(a, l);
    }
  }
}

PerturbTarget group_target(const Dataset& data, int j) {
  PerturbTarget t;
  t.q_index = j;
  for (int i = 0; i < data.n(); ++i)
    if (data.group[i] == j) t.rows.push_back(i);
  return t;
}

void sweep_target(ModelState& state, const Dataset& data,
                  const PerturbTarget& target, const MatrixXd& Z,
                  bool reference) {
  const int ng = static_cast<int>(target.rows.size());
  MatrixXd Yg(ng, data.p()), Meta(ng, data.p());
  for (int r = 0; r < ng; ++r) {
    const int i = target.rows[r];
    Yg.row(r) = data.values.row(i);
    Meta.row(r) = state.eta.row(i) * state.Lambda.transpose();
  }
  if (reference)
    sweep_columns_reference(state.Q[target.q_index], Yg, Meta, state.sigma2,
                            state.alpha, Z);
  else
    sweep_columns_fast(state.Q[target.q_index], Yg, Meta, state.sigma2,
                       state.alpha, Z);
}

}  // namespace

void update_perturbation_joint(ModelState& state, const Dataset& data, int j,
                               Rng& rng) {
  const int p = state.p();
  const int p2 = p * p;
  MatrixXd S = MatrixXd::Zero(p, p);
  MatrixXd B = MatrixXd::Zero(p, p);  // sum (Lambda eta_i) Y_i^T
  for (int i = 0; i < data.n(); ++i) {
    if (data.group[i] != j) continue;
    const VectorXd y = data.values.row(i).transpose();
    S.noalias() += y * y.transpose();
    B.noalias() += (state.Lambda * state.eta.row(i).transpose()) * y.transpose();
  }
  // vec is column-stacked: precision = I/alpha + S (x) Sigma^{-1}
  MatrixXd prec = MatrixXd::Identity(p2, p2) / state.alpha;
  for (int c = 0; c < p; ++c)
    for (int d = 0; d < p; ++d)
      for (int a = 0; a < p; ++a)
        prec(c * p + a, d * p + a) += S(c, d) / state.sigma2[a];
  VectorXd h(p2);
  const MatrixXd SB = state.sigma2.cwiseInverse().asDiagonal() * B;
  for (int c = 0; c < p; ++c)
    for (int a = 0; a < p; ++a)
      h[c * p + a] = (a == c ? 1.0 / state.alpha : 0.0) + SB(a, c);
  const Eigen::LLT<MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw NumericalError("perturbation update: Cholesky of the joint "
                         "precision failed for group " + std::to_string(j + 1));
  VectorXd z(p2);
  rng.fill_normal(z.data(), p2);
  const VectorXd q = gaussian_from_precision(llt, h, z);
  state.Q[j] = Eigen::Map<const MatrixXd>(q.data(), p, p);
}

void update_perturbation_columns(ModelState& state, const Dataset& data, int j,
                                 Rng& rng) {
  MatrixXd Z(state.p(), state.p());
  rng.fill_normal(Z.data(), Z.size());
  sweep_target(state, data, group_target(data, j), Z, false);
}

void update_perturbations_group(ModelState& state, const Dataset& data,
                                MatrixXd& W, Rng& rng, Backend backend) {
  const int J = data.n_groups();
  const int p = state.p();
  std::vector<MatrixXd> Z;
  Z.reserve(J - 1);
  for (int j = 1; j < J; ++j) {
    MatrixXd z(p, p);
    rng.fill_normal(z.data(), z.size());
    Z.push_back(std::move(z));
  }
  const auto members = data.group_members();
  if (backend == Backend::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int j = 1; j < J; ++j)
      sweep_target(state, data, group_target(data, j), Z[j - 1], false);
  } else {
    for (int j = 1; j < J; ++j)
      sweep_target(state, data, group_target(data, j), Z[j - 1], true);
  }
  for (int j = 1; j < J; ++j)
    for (int i : members[j])
      W.row(i) = (state.Q[j] * data.values.row(i).transpose()).transpose();
}

void update_perturbation_observation(ModelState& state, const Dataset& data,
                                     int i, Rng& rng) {
  MatrixXd Z(state.p(), state.p());
  rng.fill_normal(Z.data(), Z.size());
  PerturbTarget t;
  t.rows = {i};
  t.q_index = i;
  sweep_target(state, data, t, Z, false);
}

void update_perturbations_observation(ModelState& state, const Dataset& data,
                                      MatrixXd& W, Rng& rng, Backend backend) {
  const int n = data.n(), p = state.p();
  std::vector<MatrixXd> Z;
  Z.reserve(n);
  for (int i = 0; i < n; ++i) {
    MatrixXd z(p, p);
    rng.fill_normal(z.data(), z.size());
    Z.push_back(std::move(z));
  }
  const bool reference = (backend == Backend::Serial);
#pragma omp parallel for schedule(static) if (backend == Backend::Parallel)
  for (int i = 0; i < n; ++i) {
    PerturbTarget t;
    t.rows = {i};
    t.q_index = i;
    sweep_target(state, data, t, Z[i], reference);
  }
  for (int i = 0; i < n; ++i)
    W.row(i) = (state.Q[i] * data.values.row(i).transpose()).transpose();
}

void update_alpha(ModelState& state, const Hyperparameters& hyper, Rng& rng) {
  const int p = state.p();
  double ss = 0.0;
  int count = 0;
  const int first = state.mode == PerturbationMode::Group ? 1 : 0;
  for (std::size_t j = first; j < state.Q.size(); ++j) {
    ss += (state.Q[j] - MatrixXd::Identity(p, p)).squaredNorm();
    ++count;
  }
  state.alpha = draw_inverse_gamma(hyper.a_alpha + 0.5 * count * p * p,
                                   hyper.b_alpha + 0.5 * ss, rng);
}

// ---------------------------------------------------------------------------
// rank adaptation

bool adapt_rank(ModelState& state, const Hyperparameters& hyper, int iteration,
                Rng& rng, bool fix_factor_variance) {
  if (iteration < hyper.adapt_start) return false;
  const double prob = std::exp(hyper.adapt_c0 + hyper.adapt_c1 * iteration);
  if (rng.uniform() >= prob) return false;

  const int p = state.p(), k = state.k(), n = state.n();
  // Deletion looks at the effective loadings Lambda e^{1/2} (the scale the
  // model actually expresses); with E = I this is the plain threshold rule.
  std::vector<int> keep;
  for (int c = 0; c < k; ++c)
    if (std::sqrt(state.e[c]) * state.Lambda.col(c).cwiseAbs().maxCoeff() >
        hyper.zeta)
      keep.push_back(c);

  if (static_cast<int>(keep.size()) < k) {
    if (keep.empty()) keep.push_back(k - 1);  // k >= 1 floor
    const int k2 = static_cast<int>(keep.size());
    MatrixXd Lambda(p, k2), phi(p, k2), eta(n, k2);
    VectorXd e(k2), delta(k2);
    for (int c = 0; c < k2; ++c) {
      Lambda.col(c) = state.Lambda.col(keep[c]);
      phi.col(c) = state.phi.col(keep[c]);
      eta.col(c) = state.eta.col(keep[c]);
      e[c] = state.e[keep[c]];
      delta[c] = state.delta[keep[c]];
    }
    state.Lambda = std::move(Lambda);
    state.phi = std::move(phi);
    state.eta = std::move(eta);
    state.e = std::move(e);
    state.delta = std::move(delta);
    state.recompute_tau();
    return true;
  }

  if (k >= p) return false;
  // grow by one prior-drawn column
  state.delta.conservativeResize(k + 1);
  state.delta[k] = rng.gamma_rate(hyper.kappa2, 1.0);
  state.recompute_tau();
  state.phi.conservativeResize(p, k + 1);
  for (int r = 0; r < p; ++r)
    state.phi(r, k) = rng.gamma_rate(hyper.nu1, hyper.nu1);
  state.Lambda.conservativeResize(p, k + 1);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int r = 0; r < p; ++r)
    state.Lambda(r, k) = z(rng) / std::sqrt(state.phi(r, k) * state.tau[k]);
  state.e.conservativeResize(k + 1);
  state.e[k] = fix_factor_variance
                   ? 1.0
                   : draw_inverse_gamma(hyper.u, hyper.b_e, rng);
  state.eta.conservativeResize(n, k + 1);
  const double sd = std::sqrt(state.e[k]);
  for (int i = 0; i < n; ++i) state.eta(i, k) = sd * z(rng);
  return true;
}

}  // namespace pfa::kernels
