#include <doctest.h>

#include <cmath>
#include <vector>

#include "pfa/postprocess.hpp"
#include "pfa/sampler.hpp"
#include "pfa/simulate.hpp"
#include "test_utils.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace pfa;

namespace {

Dataset small_group_data(int n, int p, int J, std::uint64_t seed) {
  pfa::Rng rng(seed);
  MatrixXd Y(n, p);
  rng.fill_normal(Y.data(), Y.size());
  std::vector<int> g(n);
  for (int i = 0; i < n; ++i) g[i] = i % J;
  return center_dataset(Y, g);
}

}  // namespace

TEST_SUITE("gibbs") {

TEST_CASE("identical seeds give bit-identical chains") {
  const Dataset data = small_group_data(36, 5, 3, 1);
  SamplerConfig cfg;
  cfg.mode = PerturbationMode::Group;
  cfg.store_q = true;
  cfg.hyper.k_init = 3;
  cfg.hyper.n_iter = 250;
  cfg.hyper.burn_in = 100;
  cfg.hyper.alpha = 1e-2;
  cfg.hyper.seed = 77;

  const PosteriorChain a = run_chain(data, cfg);
  const PosteriorChain b = run_chain(data, cfg);
  REQUIRE(a.draws.size() == b.draws.size());
  for (std::size_t i = 0; i < a.draws.size(); ++i) {
    CHECK((a.draws[i].Lambda.array() == b.draws[i].Lambda.array()).all());
    CHECK((a.draws[i].sigma2.array() == b.draws[i].sigma2.array()).all());
    CHECK(a.draws[i].alpha == b.draws[i].alpha);
    for (std::size_t j = 0; j < a.draws[i].Q.size(); ++j)
      CHECK((a.draws[i].Q[j].array() == b.draws[i].Q[j].array()).all());
  }
  CHECK((a.meta.loglik_trace.array() == b.meta.loglik_trace.array()).all());
}

TEST_CASE("chain invariants: draw count, rank bounds, anchored Q") {
  const Dataset data = small_group_data(30, 4, 2, 2);
  SamplerConfig cfg;
  cfg.mode = PerturbationMode::Group;
  cfg.store_q = true;
  cfg.hyper.k_init = 3;
  cfg.hyper.n_iter = 300;
  cfg.hyper.burn_in = 120;
  cfg.hyper.alpha_mode = AlphaMode::Learned;
  cfg.hyper.seed = 5;

  const PosteriorChain chain = run_chain(data, cfg);
  CHECK(static_cast<int>(chain.draws.size()) ==
        cfg.hyper.n_iter - cfg.hyper.burn_in);
  for (int k : chain.meta.rank_trace) {
    CHECK(k >= 1);
    CHECK(k <= 4);
  }
  for (const auto& d : chain.draws) {
    CHECK((d.e.array() > 0.0).all());
    CHECK((d.sigma2.array() > 0.0).all());
    CHECK(d.alpha > 0.0);
    CHECK(d.Q[0].isIdentity(0.0));  // exact, all iterations
  }
  CHECK(chain.meta.loglik_trace.allFinite());
}

TEST_CASE("mode None runs with a finite log-likelihood trace") {
  const SimulatedData sim = gen_single_group(make_loading_fixture(1), 120, 1.0, 9);
  const Dataset data = center_dataset(sim.data);
  SamplerConfig cfg;
  cfg.hyper.k_init = 6;
  cfg.hyper.n_iter = 400;
  cfg.hyper.burn_in = 150;
  cfg.hyper.seed = 3;
  const PosteriorChain chain = run_chain(data, cfg);
  CHECK(chain.meta.loglik_trace.size() == 400);
  CHECK(chain.meta.loglik_trace.allFinite());
}

TEST_CASE("serial and parallel backends track each other over a few sweeps") {
  const Dataset data = small_group_data(24, 4, 2, 4);
  SamplerConfig cfg;
  cfg.mode = PerturbationMode::Group;
  cfg.hyper.k_init = 2;
  cfg.hyper.n_iter = 3;
  cfg.hyper.burn_in = 1;
  cfg.hyper.alpha = 1e-2;
  cfg.hyper.seed = 11;
  cfg.store_q = true;

  SamplerConfig serial = cfg;
  serial.backend = Backend::Serial;
  const PosteriorChain a = run_chain(data, cfg);
  const PosteriorChain b = run_chain(data, serial);
  REQUIRE(!a.draws.empty());
  const Draw& da = a.draws.back();
  const Draw& db = b.draws.back();
  CHECK((da.Lambda - db.Lambda).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((da.sigma2 - db.sigma2).cwiseAbs().maxCoeff() < 1e-6);
  for (std::size_t j = 0; j < da.Q.size(); ++j)
    CHECK((da.Q[j] - db.Q[j]).cwiseAbs().maxCoeff() < 1e-6);
}

// Composition oracle. A one-factor model with E fixed at I, phi pinned by a
// huge nu1, p = 2: the exact posterior of (lambda_1, lambda_2, delta,
// sigma2_1, sigma2_2) is integrable on a 5-D grid through the sufficient
// statistics, giving an independent value for the posterior mean of sigma2_1.
TEST_CASE("tiny conjugate subproblem matches a grid-posterior oracle") {
  const int n = 40;
  pfa::Rng gen(123);
  MatrixXd Y(n, 2);
  for (int i = 0; i < n; ++i) {
    const double f = gen.normal();
    Y(i, 0) = 1.2 * f + 0.7 * gen.normal();
    Y(i, 1) = -0.8 * f + 0.9 * gen.normal();
  }
  Dataset data = center_dataset(Y, std::vector<int>(n, 0));

  SamplerConfig cfg;
  cfg.mode = PerturbationMode::None;
  cfg.fix_factor_variance = true;
  cfg.hyper.k_init = 1;
  cfg.hyper.nu1 = 1e8;    // pins phi at 1
  cfg.hyper.adapt_c0 = -100.0;  // rank fixed at 1
  cfg.hyper.n_iter = 12000;
  cfg.hyper.burn_in = 2000;
  cfg.hyper.seed = 31;
  const PosteriorChain chain = run_chain(data, cfg);
  double s2_mean = 0.0;
  for (const auto& d : chain.draws) s2_mean += d.sigma2[0];
  s2_mean /= chain.draws.size();

  // sufficient statistics of the centered data
  const double S11 = data.values.col(0).squaredNorm();
  const double S22 = data.values.col(1).squaredNorm();
  const double S12 = data.values.col(0).dot(data.values.col(1));

  const auto& hy = cfg.hyper;
  auto log_post = [&](double l1, double l2, double del, double s1,
                      double s2) {
    // marginal covariance [[l1^2+s1, l1 l2],[l1 l2, l2^2+s2]]
    const double a = l1 * l1 + s1, b = l1 * l2, c = l2 * l2 + s2;
    const double det = a * c - b * b;
    if (det <= 0.0) return -1e300;
    const double quad = (c * S11 - 2.0 * b * S12 + a * S22) / det;
    double lp = -0.5 * n * std::log(det) - 0.5 * quad;
    lp += -0.5 * del * (l1 * l1 + l2 * l2) + std::log(del);  // N(0, 1/del) x2
    lp += (hy.kappa1 - 1.0) * std::log(del) - del;
    lp += -(hy.a_sigma + 1.0) * std::log(s1) - hy.b_sigma / s1;
    lp += -(hy.a_sigma + 1.0) * std::log(s2) - hy.b_sigma / s2;
    return lp;
  };

  // grids: symmetric for loadings, log-spaced for scales; the log-spacing
  // Jacobian (one factor of x per axis) is folded into the weight
  const int NL = 36, ND = 24, NS = 32;
  std::vector<double> lg(NL), dg(ND), sg(NS);
  for (int i = 0; i < NL; ++i) lg[i] = -3.0 + 6.0 * i / (NL - 1.0);
  for (int i = 0; i < ND; ++i)
    dg[i] = std::exp(std::log(1e-3) +
                     (std::log(50.0) - std::log(1e-3)) * i / (ND - 1.0));
  for (int i = 0; i < NS; ++i)
    sg[i] = std::exp(std::log(0.05) +
                     (std::log(20.0) - std::log(0.05)) * i / (NS - 1.0));

  auto weighted = [&](double l1, double l2, double del, double s1, double s2) {
    return log_post(l1, l2, del, s1, s2) + std::log(del) + std::log(s1) +
           std::log(s2);
  };

  // coarse scan for a numerically safe anchor, then one accumulation pass
  double anchor = -1e300;
  for (int a = 0; a < NL; a += 4)
    for (int b = 0; b < NL; b += 4)
      for (int c = 0; c < ND; c += 3)
        for (int d = 0; d < NS; d += 3)
          for (int e = 0; e < NS; e += 3)
            anchor = std::max(anchor, weighted(lg[a], lg[b], dg[c], sg[d], sg[e]));

  long double Z = 0.0L, Zs1 = 0.0L;
  for (double l1 : lg)
    for (double l2 : lg)
      for (double del : dg)
        for (double s1 : sg)
          for (double s2 : sg) {
            const long double w =
                expl(weighted(l1, l2, del, s1, s2) - anchor);
            Z += w;
            Zs1 += w * s1;
          }
  const double oracle_mean = static_cast<double>(Zs1 / Z);
  CHECK(std::abs(s2_mean - oracle_mean) < 0.02 * oracle_mean);
}

// With a threshold above the scale of noise-fitting columns, the deletion
// rule prunes a five-factor dataset back to five.
TEST_CASE("rank adaptation recovers the true rank (reduced replicate check)") {
  const LoadingFixture fix = make_loading_fixture(1);
  int hits = 0;
  for (int rep = 0; rep < 5; ++rep) {
    const SimulatedData sim = gen_single_group(fix, 300, 1.0, 100 + rep);
    const Dataset data = center_dataset(sim.data);
    SamplerConfig cfg;
    cfg.hyper.k_init = 8;
    cfg.hyper.zeta = 0.3;
    cfg.hyper.n_iter = 3500;
    cfg.hyper.burn_in = 1200;
    cfg.hyper.seed = 900 + rep;
    const PosteriorChain chain = run_chain(data, cfg);
    if (effective_rank(chain, cfg.hyper.zeta) == 5) ++hits;
  }
  CHECK(hits >= 4);
}

}  // TEST_SUITE
