#include <doctest.h>

#include <Eigen/Dense>

#include "pfa/dataset.hpp"
#include "pfa/errors.hpp"
#include "pfa/priors.hpp"
#include "pfa/state.hpp"
#include "test_utils.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace pfa;

TEST_SUITE("core-model") {

TEST_CASE("center_dataset subtracts global means") {
  MatrixXd raw(2, 2);
  raw << 1, 3, 3, 5;
  const Dataset d = center_dataset(raw, {0, 0});
  MatrixXd want(2, 2);
  want << -1, -1, 1, 1;
  CHECK((d.values - want).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.center_vector[0] == 2.0);
  CHECK(d.center_vector[1] == 4.0);
  CHECK(d.centered);
}

TEST_CASE("center_dataset is idempotent bit-for-bit") {
  pfa::Rng rng(7);
  MatrixXd raw(50, 8);
  rng.fill_normal(raw.data(), raw.size());
  const Dataset once = center_dataset(raw, std::vector<int>(50, 0));
  CHECK(once.values.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);

  const Dataset twice = center_dataset(once.values, once.group);
  CHECK((twice.values.array() == once.values.array()).all());
  CHECK(twice.center_vector.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("center_dataset rejects non-finite cells with location") {
  MatrixXd raw(3, 2);
  raw << 1, 2, 3, NAN, 5, 6;
  try {
    center_dataset(raw, {0, 0, 0}, {}, {"a", "MEHP"});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("MEHP") != std::string::npos);
    CHECK(msg.find("row 2") != std::string::npos);
  }
}

TEST_CASE("shared_covariance matches hand expansion and naive loops") {
  pfa::Rng rng(3);

  SUBCASE("zero loadings") {
    ModelState st = testutil::random_state(4, 2, 3, PerturbationMode::None, 1, rng);
    st.Lambda.setZero();
    st.sigma2.setOnes();
    CHECK((shared_covariance(st) - MatrixXd::Identity(4, 4)).norm() == 0.0);
  }

  SUBCASE("p=2 k=1 hand case") {
    ModelState st;
    st.Lambda = MatrixXd::Ones(2, 1);
    st.e = VectorXd::Constant(1, 2.0);
    st.sigma2 = VectorXd::Ones(2);
    const MatrixXd H = shared_covariance(st);
    CHECK(H(0, 0) == doctest::Approx(3.0));
    CHECK(H(0, 1) == doctest::Approx(2.0));
    CHECK(H(1, 0) == doctest::Approx(2.0));
    CHECK(H(1, 1) == doctest::Approx(3.0));
  }

  SUBCASE("naive triple-loop oracle, p=8 k=3") {
    ModelState st = testutil::random_state(8, 3, 2, PerturbationMode::None, 1, rng);
    const MatrixXd H = shared_covariance(st);
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        double want = a == b ? st.sigma2[a] : 0.0;
        for (int h = 0; h < 3; ++h)
          want += st.Lambda(a, h) * st.e[h] * st.Lambda(b, h);
        CHECK(H(a, b) == doctest::Approx(want).epsilon(1e-12));
      }
  }
}

TEST_CASE("group_marginal_covariance") {
  pfa::Rng rng(11);
  ModelState st = testutil::random_state(5, 2, 4, PerturbationMode::Group, 3, rng);

  SUBCASE("identity perturbation returns H") {
    CHECK((group_marginal_covariance(st, 0) - shared_covariance(st)).norm() <
          1e-12);
  }

  SUBCASE("scalar perturbation 2I gives H/4") {
    st.Q[1] = 2.0 * MatrixXd::Identity(5, 5);
    const MatrixXd C = group_marginal_covariance(st, 1);
    CHECK((C - shared_covariance(st) / 4.0).norm() < 1e-12);
  }

  SUBCASE("Monte Carlo oracle within 5 percent") {
    // Y = Qinv (Lambda eta + eps) has covariance Qinv H Qinv^T
    const MatrixXd C = group_marginal_covariance(st, 2);
    const MatrixXd Qinv = st.Q[2].inverse();
    const int M = 200000;
    MatrixXd acc = MatrixXd::Zero(5, 5);
    pfa::Rng sim(99);
    for (int m = 0; m < M; ++m) {
      VectorXd z(2), eps(5);
      sim.fill_normal(z.data(), 2);
      sim.fill_normal(eps.data(), 5);
      const VectorXd w =
          st.Lambda * st.e.cwiseSqrt().cwiseProduct(z) +
          st.sigma2.cwiseSqrt().cwiseProduct(eps);
      const VectorXd y = Qinv * w;
      acc.noalias() += y * y.transpose();
    }
    acc /= M;
    CHECK((acc - C).norm() / C.norm() < 0.05);
  }

  SUBCASE("singular perturbation is rejected naming the group") {
    st.Q[1].setZero();
    try {
      group_marginal_covariance(st, 1);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("group 2") != std::string::npos);
    }
  }
}

TEST_CASE("perturbation_magnitude") {
  pfa::Rng rng(5);
  ModelState st = testutil::random_state(6, 2, 4, PerturbationMode::Group, 2, rng);

  SUBCASE("identity gives zero") {
    CHECK(perturbation_magnitude(st, 0) == 0.0);
  }

  SUBCASE("diag(2,1,...) gives 0.5") {
    st.Q[1] = MatrixXd::Identity(6, 6);
    st.Q[1](0, 0) = 2.0;
    CHECK(perturbation_magnitude(st, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("matches explicit inverse oracle") {
    const MatrixXd Qinv = st.Q[1].inverse();
    double ss = 0.0;
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) {
        const double d = Qinv(a, b) - (a == b ? 1.0 : 0.0);
        ss += d * d;
      }
    CHECK(perturbation_magnitude(st, 1) ==
          doctest::Approx(std::sqrt(ss)).epsilon(1e-10));
  }
}

TEST_CASE("marginal covariance stays symmetric positive definite") {
  pfa::Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    ModelState st =
        testutil::random_state(5, 2, 3, PerturbationMode::Group, 2, rng);
    const MatrixXd C = group_marginal_covariance(st, 1);
    CHECK((C - C.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
    // x' Qinv H Qinv' x >= lambda_min(Sigma) ||Qinv' x||^2, so the smallest
    // eigenvalue is at least min sigma2 / sigma_max(Q)^2
    const double smax = st.Q[1].jacobiSvd().singularValues()[0];
    const double bound = st.sigma2.minCoeff() / (smax * smax);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK(es.eigenvalues().minCoeff() > bound * (1.0 - 1e-9));
  }
}

TEST_CASE("shared covariance minus Sigma has rank at most k") {
  pfa::Rng rng(23);
  ModelState st = testutil::random_state(8, 3, 2, PerturbationMode::None, 1, rng);
  MatrixXd M = shared_covariance(st);
  M.diagonal() -= st.sigma2;
  const Eigen::JacobiSVD<MatrixXd> svd(M);
  const double tol = 1e-8 * shared_covariance(st).norm();
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol) ++rank;
  CHECK(rank <= 3);
}

TEST_CASE("dataset validation") {
  MatrixXd v(3, 2);
  v << 1, 2, 3, 4, 5, 6;

  SUBCASE("group indices must partition") {
    Dataset d = testutil::tiny_dataset(v, {0, 0, 1});
    d.group[2] = 5;  // out of range
    CHECK_THROWS_AS(d.validate(), DataError);
  }

  SUBCASE("anchor group needs two observations") {
    Dataset d = testutil::tiny_dataset(v, {0, 1, 1});
    CHECK_THROWS_AS(d.validate(), DataError);
  }

  SUBCASE("centered flag is checked") {
    Dataset d = testutil::tiny_dataset(v, {0, 0, 0});
    d.centered = true;
    d.center_vector = VectorXd::Zero(2);
    CHECK_THROWS_AS(d.validate(), DataError);
  }
}

TEST_CASE("model state invariants") {
  pfa::Rng rng(31);
  ModelState st = testutil::random_state(4, 2, 3, PerturbationMode::Group, 2, rng);
  st.validate();

  SUBCASE("tau must track delta") {
    st.tau[1] *= 1.5;
    CHECK_THROWS_AS(st.validate(), NumericalError);
  }

  SUBCASE("variances stay positive") {
    st.sigma2[0] = 0.0;
    CHECK_THROWS_AS(st.validate(), NumericalError);
  }

  SUBCASE("Q[1] pinned to identity in group mode") {
    st.Q[0](0, 1) = 0.01;
    CHECK_THROWS_AS(st.validate(), NumericalError);
  }
}

}  // TEST_SUITE
