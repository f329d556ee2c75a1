#include "pfa/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pfa/errors.hpp"
#include "pfa/mvn.hpp"
#include "pfa/sampler.hpp"

namespace pfa {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Per-test-point log densities under one draw's parameters.
VectorXd draw_loglik_rows(const MatrixXd& Lambda, const VectorXd& e,
                          const VectorXd& sigma2, double alpha,
                          const std::vector<MatrixXd>& Q,
                          PerturbationMode mode, const MatrixXd& Y,
                          const std::vector<int>& test_group) {
  switch (mode) {
    case PerturbationMode::None:
      return lowrank_mvn_loglik(Y, Lambda, e, sigma2);
    case PerturbationMode::Group: {
      MatrixXd W(Y.rows(), Y.cols());
      for (int i = 0; i < Y.rows(); ++i)
        W.row(i) =
            (Q.at(test_group[i]) * Y.row(i).transpose()).transpose();
      return lowrank_mvn_loglik(W, Lambda, e, sigma2);
    }
    case PerturbationMode::Observation: {
      // Q Y for a new observation: N(0, alpha tr(H) I + H), still diagonal
      // plus low rank.
      const double s =
          (Lambda.array().square().matrix() * e).sum() + sigma2.sum();
      const VectorXd sig2 = sigma2.array() + alpha * s;
      return lowrank_mvn_loglik(Y, Lambda, e, sig2);
    }
  }
  return VectorXd::Zero(Y.rows());
}

std::vector<int> map_test_groups(const Dataset& testset,
                                 const std::vector<std::string>& model_groups,
                                 PerturbationMode mode) {
  std::vector<int> mapped(testset.n(), 0);
  if (mode != PerturbationMode::Group) return mapped;
  std::vector<int> label_map(testset.n_groups(), -1);
  for (int g = 0; g < testset.n_groups(); ++g) {
    const auto it = std::find(model_groups.begin(), model_groups.end(),
                              testset.group_names[g]);
    if (it == model_groups.end())
      throw DataError("test group label '" + testset.group_names[g] +
                      "' is unknown to the fitted model");
    label_map[g] = static_cast<int>(it - model_groups.begin());
  }
  for (int i = 0; i < testset.n(); ++i) mapped[i] = label_map[testset.group[i]];
  return mapped;
}

}  // namespace

PredictiveLoglik predictive_loglik(const PosteriorChain& chain,
                                   const Dataset& testset, int thin) {
  if (chain.draws.empty()) throw ConfigError("chain has no stored draws");
  if (thin < 1) thin = 1;
  const auto mode = chain.meta.mode;
  if (mode == PerturbationMode::Group && !chain.meta.store_q)
    throw ConfigError(
        "group-mode prediction needs a chain run with store_q enabled");
  const std::vector<int> test_group =
      map_test_groups(testset, chain.meta.group_names, mode);

  const int n = testset.n();
  VectorXd acc = VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  int used = 0;
  for (std::size_t d = 0; d < chain.draws.size(); d += thin) {
    const Draw& dr = chain.draws[d];
    const VectorXd ll = draw_loglik_rows(dr.Lambda, dr.e, dr.sigma2, dr.alpha,
                                         dr.Q, mode, testset.values,
                                         test_group);
    for (int i = 0; i < n; ++i) {
      const double a = std::max(acc[i], ll[i]);
      acc[i] = a + std::log(std::exp(acc[i] - a) + std::exp(ll[i] - a));
    }
    ++used;
  }
  PredictiveLoglik out;
  out.n_points = n;
  out.n_draws = used;
  out.total = (acc.array() - std::log(double(used))).sum();
  out.per_point = out.total / n;
  out.convention =
      "per point: log of the draw-averaged density; total: sum over points";
  return out;
}

double predictive_loglik_state(const ModelState& state,
                               const Dataset& testset) {
  std::vector<int> test_group(testset.n(), 0);
  if (state.mode == PerturbationMode::Group) {
    if (testset.n_groups() != static_cast<int>(state.Q.size()))
      throw DataError("test groups do not match the model's groups");
    test_group = testset.group;
  }
  return draw_loglik_rows(state.Lambda, state.e, state.sigma2, state.alpha,
                          state.Q, state.mode, testset.values, test_group)
      .sum();
}

// ---------------------------------------------------------------------------

namespace {

struct Split {
  Dataset train;
  Dataset test;
};

Split make_split(const Dataset& data, Rng& rng) {
  const auto members = data.group_members();
  std::vector<int> train_rows, test_rows;
  for (const auto& rows : members) {
    std::vector<int> shuffled = rows;
    for (int i = static_cast<int>(shuffled.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(rng() % (i + 1));
      std::swap(shuffled[i], shuffled[j]);
    }
    const int half = static_cast<int>((shuffled.size() + 1) / 2);
    train_rows.insert(train_rows.end(), shuffled.begin(),
                      shuffled.begin() + half);
    test_rows.insert(test_rows.end(), shuffled.begin() + half, shuffled.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  auto take = [&](const std::vector<int>& rows) {
    Eigen::MatrixXd v(rows.size(), data.p());
    std::vector<int> g(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      v.row(i) = data.values.row(rows[i]);
      g[i] = data.group[rows[i]];
    }
    return std::make_pair(std::move(v), std::move(g));
  };

  Split s;
  auto [tv, tg] = take(train_rows);
  s.train = center_dataset(tv, std::move(tg), data.group_names,
                           data.variable_names);
  auto [ev, eg] = take(test_rows);
  s.test.values = apply_centering(ev, s.train.center_vector);
  s.test.group = std::move(eg);
  s.test.group_names = data.group_names;
  s.test.variable_names = data.variable_names;
  s.test.centered = false;
  return s;
}

}  // namespace

CvResult cv_alpha(const Dataset& data, const std::vector<double>& alpha_grid,
                  int n_splits, const SamplerConfig& config,
                  double tie_tolerance) {
  if (alpha_grid.empty()) throw ConfigError("alpha grid is empty");
  if (n_splits < 1) throw ConfigError("need at least one split");
  for (int j = 0; j < data.n_groups(); ++j) {
    const auto sizes = data.group_sizes();
    if (sizes[j] < 2)
      throw DataError("group " + data.group_names[j] +
                      " has a single observation and cannot be split 50-50");
  }

  CvResult out;
  out.grid = alpha_grid;
  std::sort(out.grid.begin(), out.grid.end());
  const int na = static_cast<int>(out.grid.size());

  std::vector<Split> splits;
  splits.reserve(n_splits);
  for (int s = 0; s < n_splits; ++s) {
    Rng rng = Rng::stream(config.hyper.seed, 501 + s);
    splits.push_back(make_split(data, rng));
  }

  MatrixXd score(na, n_splits);
  // grid x split jobs are independent; chains stay single-threaded
#pragma omp parallel for collapse(2) schedule(dynamic)
  for (int a = 0; a < na; ++a) {
    for (int s = 0; s < n_splits; ++s) {
      SamplerConfig cfg = config;
      cfg.hyper.alpha = out.grid[a];
      cfg.hyper.alpha_mode = AlphaMode::Fixed;
      cfg.hyper.seed =
          config.hyper.seed ^ (0x9e3779b97f4a7c15ULL * (a * n_splits + s + 1));
      cfg.store_q = (config.mode == PerturbationMode::Group);
      cfg.compute_loglik_trace = false;
      const PosteriorChain chain = run_chain(splits[s].train, cfg);
      // thin = 5: enough draws for a stable mixture density at a fifth of
      // the evaluation cost
      score(a, s) = predictive_loglik(chain, splits[s].test, 5).total;
    }
  }

  out.mean_loglik.resize(na);
  out.se_loglik.resize(na);
  for (int a = 0; a < na; ++a) {
    const double mean = score.row(a).mean();
    out.mean_loglik[a] = mean;
    double var = 0.0;
    for (int s = 0; s < n_splits; ++s)
      var += (score(a, s) - mean) * (score(a, s) - mean);
    var /= std::max(1, n_splits - 1);
    out.se_loglik[a] = std::sqrt(var / n_splits);
    for (int s = 0; s < n_splits; ++s)
      out.table.push_back({out.grid[a], s, score(a, s)});
  }

  const int best =
      static_cast<int>(std::max_element(out.mean_loglik.begin(),
                                        out.mean_loglik.end()) -
                       out.mean_loglik.begin());
  out.tie_tolerance =
      tie_tolerance > 0.0 ? tie_tolerance : 2.0 * out.se_loglik[best];
  out.chosen_alpha = out.grid[best];
  for (int a = 0; a < na; ++a) {
    if (out.mean_loglik[a] >= out.mean_loglik[best] - out.tie_tolerance) {
      out.chosen_alpha = out.grid[a];  // grid is sorted: smallest tie wins
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

DivergenceMatrix divergence_matrix(const PosteriorChain& chain) {
  if (chain.meta.mode != PerturbationMode::Group)
    throw ConfigError("divergence requires a group-mode chain");
  if (chain.n_accum == 0) throw ConfigError("chain holds no draws");
  const auto Qmean = chain.mean_Q();
  const int J = static_cast<int>(Qmean.size());
  const int p = static_cast<int>(Qmean[0].rows());

  VectorXd inv_norm2(J);
  for (int j = 0; j < J; ++j)
    inv_norm2[j] =
        invert_checked(Qmean[j], "group " + std::to_string(j + 1)).squaredNorm();

  DivergenceMatrix out;
  out.d = MatrixXd::Zero(J, J);
  out.edge_weights = MatrixXd::Zero(J, J);
  for (int j = 0; j < J; ++j)
    for (int l = 0; l < J; ++l) {
      if (j == l) continue;
      out.d(j, l) =
          std::sqrt(std::abs(inv_norm2[j] - inv_norm2[l]) / (double(p) * p));
      out.edge_weights(j, l) = 60.0 / out.d(j, l);
    }
  out.d_per_draw = chain.sum_divergence / chain.n_accum;
  return out;
}

double kl_group_marginals(const ModelState& state, int j, int l) {
  if (j == l) return 0.0;
  const MatrixXd Cj = group_marginal_covariance(state, j);
  const MatrixXd Cl = group_marginal_covariance(state, l);
  const int p = state.p();
  const Eigen::LLT<MatrixXd> lltl(Cl);
  const Eigen::LLT<MatrixXd> lltj(Cj);
  if (lltl.info() != Eigen::Success || lltj.info() != Eigen::Success)
    throw NumericalError("group marginal covariance is not positive definite");
  auto half_logdet = [p](const Eigen::LLT<MatrixXd>& llt) {
    double s = 0.0;
    for (int i = 0; i < p; ++i) s += std::log(llt.matrixLLT()(i, i));
    return s;
  };
  const double trace = lltl.solve(Cj).trace();
  return 0.5 * (trace - p) + half_logdet(lltl) - half_logdet(lltj);
}

double covariance_mse(const MatrixXd& estimate, const MatrixXd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw ConfigError("covariance dimensions do not match");
  return (estimate - truth).squaredNorm() /
         (double(truth.rows()) * truth.cols());
}

double hotelling_t2(const Dataset& data, int j, int l) {
  const auto members = data.group_members();
  const auto& rj = members.at(j);
  const auto& rl = members.at(l);
  const int nj = static_cast<int>(rj.size());
  const int nl = static_cast<int>(rl.size());
  const int p = data.p();
  if (nj + nl <= p + 1)
    throw DataError("not enough observations for Hotelling T^2 (need n_j + "
                    "n_l > p + 1)");

  VectorXd mj = VectorXd::Zero(p), ml = VectorXd::Zero(p);
  for (int i : rj) mj += data.values.row(i).transpose();
  for (int i : rl) ml += data.values.row(i).transpose();
  mj /= nj;
  ml /= nl;

  MatrixXd S = MatrixXd::Zero(p, p);
  for (int i : rj) {
    const VectorXd d = data.values.row(i).transpose() - mj;
    S.noalias() += d * d.transpose();
  }
  for (int i : rl) {
    const VectorXd d = data.values.row(i).transpose() - ml;
    S.noalias() += d * d.transpose();
  }
  S /= (nj + nl - 2);

  const Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw NumericalError("pooled covariance is singular");
  const VectorXd diff = mj - ml;
  return (double(nj) * nl / (nj + nl)) * diff.dot(llt.solve(diff));
}

}  // namespace pfa
