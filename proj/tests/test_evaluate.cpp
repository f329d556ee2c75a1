#include <doctest.h>

#include <cmath>

#include "pfa/errors.hpp"
#include "pfa/evaluate.hpp"
#include "pfa/mvn.hpp"
#include "pfa/sampler.hpp"
#include "pfa/simulate.hpp"
#include "test_utils.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace pfa;

TEST_SUITE("evaluate") {

TEST_CASE("predictive log-likelihood of a single state") {
  SUBCASE("Lambda = 0, Sigma = I, point at the origin") {
    ModelState st;
    st.mode = PerturbationMode::None;
    const int p = 4;
    st.Lambda = MatrixXd::Zero(p, 1);
    st.e = VectorXd::Ones(1);
    st.sigma2 = VectorXd::Ones(p);
    Dataset t = testutil::tiny_dataset(MatrixXd::Zero(1, p), {0});
    CHECK(predictive_loglik_state(st, t) ==
          doctest::Approx(-0.5 * p * std::log(2.0 * M_PI)).epsilon(1e-12));
  }

  SUBCASE("scalar Gaussian: sigma2 = 2, y = 1") {
    ModelState st;
    st.mode = PerturbationMode::None;
    st.Lambda = MatrixXd::Zero(1, 1);
    st.e = VectorXd::Ones(1);
    st.sigma2 = VectorXd::Constant(1, 2.0);
    Dataset t = testutil::tiny_dataset(MatrixXd::Constant(1, 1, 1.0), {0});
    CHECK(predictive_loglik_state(st, t) ==
          doctest::Approx(-0.5 * std::log(4.0 * M_PI) - 0.25).epsilon(1e-12));
  }

  SUBCASE("random state matches the dense-density oracle") {
    pfa::Rng rng(1);
    ModelState st = testutil::random_state(6, 3, 2, PerturbationMode::None, 1, rng);
    MatrixXd Y(5, 6);
    rng.fill_normal(Y.data(), Y.size());
    Dataset t = testutil::tiny_dataset(Y, {0, 0, 0, 0, 0});
    const double got = predictive_loglik_state(st, t);
    const double want = dense_mvn_loglik(Y, shared_covariance(st)).sum();
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }

  SUBCASE("observation mode uses alpha tr(H) I + H") {
    pfa::Rng rng(2);
    ModelState st =
        testutil::random_state(5, 2, 3, PerturbationMode::Observation, 0, rng);
    st.Q.clear();
    MatrixXd Y(4, 5);
    rng.fill_normal(Y.data(), Y.size());
    Dataset t = testutil::tiny_dataset(Y, {0, 0, 0, 0});
    const MatrixXd H = shared_covariance(st);
    const MatrixXd C =
        H + st.alpha * H.trace() * MatrixXd::Identity(5, 5);
    CHECK(predictive_loglik_state(st, t) ==
          doctest::Approx(dense_mvn_loglik(Y, C).sum()).epsilon(1e-9));
  }

  SUBCASE("density peaks at the mode and decays along a ray") {
    pfa::Rng rng(3);
    ModelState st = testutil::random_state(4, 2, 2, PerturbationMode::None, 1, rng);
    VectorXd dir = VectorXd::Ones(4);
    double last = INFINITY;
    for (double scale : {0.0, 0.5, 1.0, 2.0, 4.0}) {
      Dataset t = testutil::tiny_dataset((scale * dir).transpose(), {0});
      const double ll = predictive_loglik_state(st, t);
      CHECK(ll < last + 1e-12);
      last = ll;
    }
  }
}

TEST_CASE("predictive log-likelihood of a chain rejects unknown labels") {
  const SimulatedData sim =
      gen_multigroup_perturbed(make_loading_fixture(1), 1e-4, 11,
                               {.n = 60, .n_groups = 3});
  const Dataset data = center_dataset(sim.data);
  SamplerConfig cfg;
  cfg.mode = PerturbationMode::Group;
  cfg.store_q = true;
  cfg.hyper.k_init = 4;
  cfg.hyper.n_iter = 120;
  cfg.hyper.burn_in = 60;
  cfg.hyper.seed = 12;
  const PosteriorChain chain = run_chain(data, cfg);

  Dataset test = data;
  test.group_names = {"g1", "gX", "g3"};
  try {
    predictive_loglik(chain, test);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("gX") != std::string::npos);
  }
  // with matching labels it evaluates fine
  CHECK(std::isfinite(predictive_loglik(chain, data).total));
}

TEST_CASE("cv_alpha mechanics") {
  const SimulatedData sim =
      gen_multigroup_perturbed(make_loading_fixture(1), 1e-3, 21,
                               {.n = 48, .n_groups = 2});
  const Dataset data = center_dataset(sim.data);
  SamplerConfig cfg;
  cfg.mode = PerturbationMode::Group;
  cfg.hyper.k_init = 3;
  cfg.hyper.n_iter = 150;
  cfg.hyper.burn_in = 60;
  cfg.hyper.seed = 5;

  SUBCASE("single-value grid returns that value") {
    const CvResult r = cv_alpha(data, {1e-3}, 2, cfg);
    CHECK(r.chosen_alpha == 1e-3);
    CHECK(r.table.size() == 2);
  }

  SUBCASE("ties resolve to the smallest alpha") {
    const CvResult r = cv_alpha(data, {1e-2, 1e-3}, 2, cfg, 1e18);
    CHECK(r.chosen_alpha == 1e-3);
  }

  SUBCASE("choice is invariant to grid order and the table covers the grid") {
    const CvResult a = cv_alpha(data, {1e-3, 1e-2}, 2, cfg);
    const CvResult b = cv_alpha(data, {1e-2, 1e-3}, 2, cfg);
    CHECK(a.chosen_alpha == b.chosen_alpha);
    CHECK(a.table.size() == 4);  // one row per (alpha, split)
  }

  SUBCASE("singleton groups are rejected") {
    Dataset bad = data;
    bad.group.assign(bad.n(), 0);
    bad.group[bad.n() - 1] = 1;
    CHECK_THROWS_AS(cv_alpha(bad, {1e-3}, 2, cfg), DataError);
  }
}

TEST_CASE("divergence matrix") {
  PosteriorChain chain;
  chain.meta.mode = PerturbationMode::Group;
  chain.n_accum = 1;

  SUBCASE("identity perturbations give the zero matrix") {
    chain.sum_Q = {MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)};
    const DivergenceMatrix D = divergence_matrix(chain);
    CHECK(D.d.cwiseAbs().maxCoeff() == 0.0);
    CHECK(D.d.rows() == 2);
  }

  SUBCASE("norms 8 and 4 at p=2 give d = 1, and symmetry is exact") {
    chain.sum_Q = {MatrixXd::Identity(2, 2) * 0.5,
                   MatrixXd::Identity(2, 2) / std::sqrt(2.0)};
    // ||Q1^{-1}||^2 = 8, ||Q2^{-1}||^2 = 4
    const DivergenceMatrix D = divergence_matrix(chain);
    CHECK(D.d(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(D.d(1, 0) == D.d(0, 1));
    CHECK(D.d(0, 0) == 0.0);
    CHECK(D.d(1, 1) == 0.0);
    CHECK(D.edge_weights(0, 1) == doctest::Approx(60.0).epsilon(1e-12));
  }

  SUBCASE("distinct perturbations with equal inverse norms give d = 0") {
    MatrixXd R(2, 2);  // rotation: orthogonal, same Frobenius norm as I
    const double th = 0.3;
    R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    chain.sum_Q = {MatrixXd::Identity(2, 2), R};
    const DivergenceMatrix D = divergence_matrix(chain);
    CHECK(D.d(0, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("KL between group marginals") {
  pfa::Rng rng(31);

  SUBCASE("same group gives zero") {
    ModelState st = testutil::random_state(3, 2, 2, PerturbationMode::Group, 2, rng);
    CHECK(kl_group_marginals(st, 1, 1) == 0.0);
  }

  SUBCASE("scalar case: variances 1 and e") {
    ModelState st;
    st.mode = PerturbationMode::Group;
    st.Lambda = MatrixXd::Zero(1, 1);
    st.e = VectorXd::Ones(1);
    st.sigma2 = VectorXd::Ones(1);
    st.Q = {MatrixXd::Identity(1, 1),
            MatrixXd::Identity(1, 1) * std::exp(-0.5)};
    // group 2 marginal variance: exp(1); KL(N(0,1) || N(0,e)) = 1/(2e)
    CHECK(kl_group_marginals(st, 0, 1) ==
          doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-10));
  }

  SUBCASE("nonnegativity, zero iff equal covariances") {
    ModelState st = testutil::random_state(3, 2, 2, PerturbationMode::Group, 3, rng);
    CHECK(kl_group_marginals(st, 1, 2) > 0.0);
    st.Q[2] = st.Q[1];
    CHECK(kl_group_marginals(st, 1, 2) < 1e-10);
  }

  SUBCASE("Monte Carlo oracle at p=4") {
    ModelState st = testutil::random_state(4, 2, 2, PerturbationMode::Group, 2,
                                           rng, 0.3);
    const double exact = kl_group_marginals(st, 1, 0);
    const MatrixXd Cj = group_marginal_covariance(st, 1);
    const MatrixXd Cl = group_marginal_covariance(st, 0);
    const Eigen::LLT<MatrixXd> lj(Cj);
    pfa::Rng mc(77);
    const int M = 200000;
    std::vector<double> ratio;
    ratio.reserve(M);
    MatrixXd X(M, 4);
    mc.fill_normal(X.data(), X.size());
    const MatrixXd L = lj.matrixL();
    for (int i = 0; i < M; ++i) {
      const VectorXd x = L * X.row(i).transpose();
      const double lj_ = dense_mvn_loglik(x.transpose(), Cj)[0];
      const double ll_ = dense_mvn_loglik(x.transpose(), Cl)[0];
      ratio.push_back(lj_ - ll_);
    }
    const auto s = testutil::sample_stats(ratio);
    CHECK(std::abs(s.mean - exact) <
          std::max(0.01 * std::abs(exact), 3.0 * s.se_mean));
  }
}

TEST_CASE("covariance mse") {
  MatrixXd A = MatrixXd::Identity(2, 2);
  CHECK(covariance_mse(A, A) == 0.0);
  CHECK(covariance_mse(A, A.array() + 1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(covariance_mse(A, MatrixXd::Identity(3, 3)), ConfigError);
}

TEST_CASE("Hotelling T^2") {
  SUBCASE("identical group means give zero") {
    MatrixXd v(4, 1);
    v << 1.0, -1.0, 1.0, -1.0;
    Dataset d = testutil::tiny_dataset(v, {0, 0, 1, 1});
    CHECK(hotelling_t2(d, 0, 1) == doctest::Approx(0.0));
  }

  SUBCASE("scalar case with pooled variance 1") {
    const double a = M_SQRT1_2;
    MatrixXd v(4, 1);
    v << a, -a, 2 + a, 2 - a;
    Dataset d = testutil::tiny_dataset(v, {0, 0, 1, 1});
    CHECK(hotelling_t2(d, 0, 1) == doctest::Approx(4.0).epsilon(1e-12));
  }

  SUBCASE("matches the explicit two-step oracle") {
    pfa::Rng rng(5);
    MatrixXd v(30, 3);
    rng.fill_normal(v.data(), v.size());
    std::vector<int> g(30);
    for (int i = 0; i < 30; ++i) g[i] = i < 14 ? 0 : 1;
    Dataset d = testutil::tiny_dataset(v, g);
    const double got = hotelling_t2(d, 0, 1);

    const VectorXd mj = v.topRows(14).colwise().mean();
    const VectorXd ml = v.bottomRows(16).colwise().mean();
    MatrixXd S = MatrixXd::Zero(3, 3);
    for (int i = 0; i < 14; ++i) {
      const VectorXd x = v.row(i).transpose() - mj;
      S += x * x.transpose();
    }
    for (int i = 14; i < 30; ++i) {
      const VectorXd x = v.row(i).transpose() - ml;
      S += x * x.transpose();
    }
    S /= 28.0;
    const VectorXd diff = mj - ml;
    const double want = (14.0 * 16.0 / 30.0) * diff.dot(S.inverse() * diff);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }

  SUBCASE("too few observations is an error") {
    MatrixXd v(4, 4);
    v.setRandom();
    Dataset d = testutil::tiny_dataset(v, {0, 0, 1, 1});
    CHECK_THROWS_AS(hotelling_t2(d, 0, 1), DataError);
  }
}

}  // TEST_SUITE
