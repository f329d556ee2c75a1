#include "pfa/simulate.hpp"

#include <cmath>

#include "pfa/errors.hpp"
#include "pfa/priors.hpp"
#include "pfa/rng.hpp"

namespace pfa {

using Eigen::MatrixXd;
using Eigen::VectorXd;

LoadingFixture make_loading_fixture(int which) {
  LoadingFixture f;
  f.which = which;
  if (which == 1) {
    f.block = 5;
    f.step = 4;
    f.matrix = MatrixXd::Zero(21, 5);
  } else if (which == 2) {
    f.block = 28;
    f.step = 25;
    f.matrix = MatrixXd::Zero(128, 5);
  } else {
    throw ConfigError("loading fixture must be 1 or 2");
  }
  for (int c = 0; c < 5; ++c)
    for (int r = c * f.step; r < c * f.step + f.block; ++r)
      f.matrix(r, c) = 1.0;
  return f;
}

namespace {

std::vector<int> even_group_sizes(int n, int J) {
  std::vector<int> sizes(J, n / J);
  for (int j = 0; j < n % J; ++j) ++sizes[j];
  return sizes;
}

Dataset wrap(MatrixXd values, const std::vector<int>& sizes) {
  Dataset d;
  d.values = std::move(values);
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    d.group_names.push_back("g" + std::to_string(j + 1));
    d.group.insert(d.group.end(), sizes[j], static_cast<int>(j));
  }
  for (int c = 0; c < d.values.cols(); ++c)
    d.variable_names.push_back("v" + std::to_string(c + 1));
  d.centered = false;
  d.center_vector = VectorXd::Zero(d.values.cols());
  return d;
}

// Shared-scale data W = Lambda0 eta + eps. Consumption order (eta, then eps)
// is shared by the group generators so that common parts match bit for bit
// under the same seed.
MatrixXd draw_shared_scale(const MatrixXd& Lambda0, int n, double sigma,
                           Rng& rng, MatrixXd* eta_out = nullptr) {
  const int p = static_cast<int>(Lambda0.rows());
  const int k = static_cast<int>(Lambda0.cols());
  MatrixXd eta(n, k), eps(n, p);
  rng.fill_normal(eta.data(), eta.size());
  rng.fill_normal(eps.data(), eps.size());
  MatrixXd W = eta * Lambda0.transpose() + sigma * eps;
  if (eta_out) *eta_out = std::move(eta);
  return W;
}

}  // namespace

SimulatedData gen_single_group(const LoadingFixture& fixture, int n,
                               double sigma, std::uint64_t seed) {
  Rng rng(seed);
  SimulatedData out;
  out.true_loadings = fixture.matrix;
  out.data = wrap(draw_shared_scale(fixture.matrix, n, sigma, rng), {n});
  return out;
}

SimulatedData gen_multigroup_perturbed(const LoadingFixture& fixture,
                                       double alpha0, std::uint64_t seed,
                                       const MultigroupOptions& opts) {
  Rng rng(seed);
  const int p = static_cast<int>(fixture.matrix.rows());
  const auto sizes = even_group_sizes(opts.n, opts.n_groups);

  MatrixXd W = draw_shared_scale(fixture.matrix, opts.n, opts.sigma, rng);
  SimulatedData out;
  out.true_loadings = fixture.matrix;
  out.alpha0 = alpha0;
  out.true_Q.assign(opts.n_groups, MatrixXd::Identity(p, p));
  for (int j = 1; j < opts.n_groups; ++j) {
    double a = alpha0;
    if (!opts.group_alpha_scale.empty()) a *= opts.group_alpha_scale.at(j);
    out.true_Q[j] = draw_perturbation(a, p, rng);
  }

  // observed data: Y = Q0^{-1} W so that Q0 Y follows the shared model
  MatrixXd Y(opts.n, p);
  int row = 0;
  for (int j = 0; j < opts.n_groups; ++j) {
    const MatrixXd Qinv =
        invert_checked(out.true_Q[j], "group " + std::to_string(j + 1));
    for (int i = 0; i < sizes[j]; ++i, ++row)
      Y.row(row) = (Qinv * W.row(row).transpose()).transpose();
  }
  out.data = wrap(std::move(Y), sizes);
  return out;
}

SimulatedData gen_partially_shared(const LoadingFixture& fixture, double alpha0,
                                   std::uint64_t seed,
                                   const MultigroupOptions& opts) {
  if (opts.n_groups < 3)
    throw ConfigError("partially shared design needs at least 3 groups");
  Rng rng(seed);
  const int p = static_cast<int>(fixture.matrix.rows());
  const auto sizes = even_group_sizes(opts.n, opts.n_groups);

  MatrixXd eta;
  MatrixXd W = draw_shared_scale(fixture.matrix, opts.n, opts.sigma, rng, &eta);
  // the last two groups only load on the first three columns
  const MatrixXd Lambda01 = fixture.matrix.leftCols(3);
  {
    int row = 0;
    for (int j = 0; j < opts.n_groups; ++j) {
      for (int i = 0; i < sizes[j]; ++i, ++row) {
        if (j < opts.n_groups - 2) continue;
        const MatrixXd eps =
            W.row(row) - (eta.row(row) * fixture.matrix.transpose());
        W.row(row) = eta.row(row).head(3) * Lambda01.transpose() + eps;
      }
    }
  }

  SimulatedData out;
  out.true_loadings = fixture.matrix;
  out.alpha0 = alpha0;
  out.true_Q.assign(opts.n_groups, MatrixXd::Identity(p, p));
  for (int j = 1; j < opts.n_groups; ++j)
    out.true_Q[j] = draw_perturbation(alpha0, p, rng);

  MatrixXd Y(opts.n, p);
  int row = 0;
  for (int j = 0; j < opts.n_groups; ++j) {
    const MatrixXd Qinv =
        invert_checked(out.true_Q[j], "group " + std::to_string(j + 1));
    for (int i = 0; i < sizes[j]; ++i, ++row)
      Y.row(row) = (Qinv * W.row(row).transpose()).transpose();
  }
  out.data = wrap(std::move(Y), sizes);
  return out;
}

SimulatedData gen_additive(const LoadingFixture& fixture, double psi_mean,
                           double psi_sd, std::uint64_t seed,
                           AdditiveVariant variant,
                           const MultigroupOptions& opts) {
  Rng rng(seed);
  const int p = static_cast<int>(fixture.matrix.rows());
  const int k = static_cast<int>(fixture.matrix.cols());
  const auto sizes = even_group_sizes(opts.n, opts.n_groups);

  MatrixXd eta1(opts.n, k), eta2, eps(opts.n, p);
  rng.fill_normal(eta1.data(), eta1.size());
  if (variant == AdditiveVariant::SeparateFactors) {
    eta2.resize(opts.n, k);
    rng.fill_normal(eta2.data(), eta2.size());
  }
  rng.fill_normal(eps.data(), eps.size());

  std::vector<MatrixXd> Psi(opts.n_groups);
  for (int j = 0; j < opts.n_groups; ++j) {
    Psi[j].resize(p, k);
    rng.fill_normal(Psi[j].data(), Psi[j].size());
    Psi[j] = (Psi[j].array() * psi_sd + psi_mean).matrix();
  }

  MatrixXd Y(opts.n, p);
  int row = 0;
  for (int j = 0; j < opts.n_groups; ++j) {
    for (int i = 0; i < sizes[j]; ++i, ++row) {
      if (variant == AdditiveVariant::SeparateFactors)
        Y.row(row) = eta1.row(row) * fixture.matrix.transpose() +
                     eta2.row(row) * Psi[j].transpose() +
                     opts.sigma * eps.row(row);
      else
        Y.row(row) =
            eta1.row(row) * (fixture.matrix + Psi[j]).transpose() +
            opts.sigma * eps.row(row);
    }
  }
  SimulatedData out;
  out.true_loadings = fixture.matrix;
  out.true_Q = std::move(Psi);  // the additive perturbations, for reference
  out.data = wrap(std::move(Y), sizes);
  return out;
}

SimulatedData gen_observation_perturbed(const LoadingFixture& fixture,
                                        double alpha0, std::uint64_t seed,
                                        int n, double sigma) {
  Rng rng(seed);
  const int p = static_cast<int>(fixture.matrix.rows());
  MatrixXd W = draw_shared_scale(fixture.matrix, n, sigma, rng);
  SimulatedData out;
  out.true_loadings = fixture.matrix;
  out.alpha0 = alpha0;
  out.true_Q.reserve(n);
  MatrixXd Y(n, p);
  for (int i = 0; i < n; ++i) {
    out.true_Q.push_back(draw_perturbation(alpha0, p, rng));
    const MatrixXd Qinv =
        invert_checked(out.true_Q.back(), "observation " + std::to_string(i + 1));
    Y.row(i) = (Qinv * W.row(i).transpose()).transpose();
  }
  out.data = wrap(std::move(Y), {n});
  return out;
}

SimulatedData gen_from_model(const ModelState& state,
                             const std::vector<int>& counts,
                             std::uint64_t seed) {
  Rng rng(seed);
  const int p = state.p(), k = state.k();
  int n = 0;
  for (int c : counts) n += c;

  MatrixXd eta(n, k), eps(n, p);
  rng.fill_normal(eta.data(), eta.size());
  rng.fill_normal(eps.data(), eps.size());
  eta = eta * state.e.cwiseSqrt().asDiagonal();
  eps = eps * state.sigma2.cwiseSqrt().asDiagonal();
  MatrixXd W = eta * state.Lambda.transpose() + eps;

  SimulatedData out;
  out.true_loadings = state.Lambda;
  out.alpha0 = state.alpha;

  if (state.mode == PerturbationMode::Observation) {
    if (counts.size() != 1)
      throw ConfigError("observation mode takes a single total count");
    out.true_Q.reserve(n);
    MatrixXd Y(n, p);
    for (int i = 0; i < n; ++i) {
      out.true_Q.push_back(draw_perturbation(state.alpha, p, rng));
      Y.row(i) = (invert_checked(out.true_Q.back(),
                                 "observation " + std::to_string(i + 1)) *
                  W.row(i).transpose())
                     .transpose();
    }
    out.data = wrap(std::move(Y), counts);
    return out;
  }

  const int J = static_cast<int>(counts.size());
  if (state.mode == PerturbationMode::Group &&
      static_cast<int>(state.Q.size()) != J)
    throw ConfigError("counts must list one entry per model group");
  out.true_Q.assign(J, MatrixXd::Identity(p, p));
  MatrixXd Y(n, p);
  int row = 0;
  for (int j = 0; j < J; ++j) {
    MatrixXd Qinv = MatrixXd::Identity(p, p);
    if (state.mode == PerturbationMode::Group) {
      out.true_Q[j] = state.Q[j];
      Qinv = invert_checked(state.Q[j], "group " + std::to_string(j + 1));
    }
    for (int i = 0; i < counts[j]; ++i, ++row)
      Y.row(row) = (Qinv * W.row(row).transpose()).transpose();
  }
  out.data = wrap(std::move(Y), counts);
  return out;
}

}  // namespace pfa
