#include "pfa/priors.hpp"

#include <cmath>

#include "pfa/errors.hpp"

namespace pfa {

MgpDraw draw_mgp_loadings(const Hyperparameters& hyper, int p, int k,
                          Rng& rng) {
  MgpDraw out;
  out.delta.resize(k);
  out.delta[0] = rng.gamma_rate(hyper.kappa1, 1.0);
  for (int i = 1; i < k; ++i) out.delta[i] = rng.gamma_rate(hyper.kappa2, 1.0);
  out.tau.resize(k);
  double prod = 1.0;
  for (int i = 0; i < k; ++i) {
    prod *= out.delta[i];
    out.tau[i] = prod;
  }
  out.phi.resize(p, k);
  for (int c = 0; c < k; ++c)
    for (int r = 0; r < p; ++r)
      out.phi(r, c) = rng.gamma_rate(hyper.nu1, hyper.nu1);
  out.Lambda.resize(p, k);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int c = 0; c < k; ++c)
    for (int r = 0; r < p; ++r)
      out.Lambda(r, c) = z(rng) / std::sqrt(out.phi(r, c) * out.tau[c]);
  return out;
}

Eigen::MatrixXd draw_perturbation(double alpha, int p, Rng& rng) {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  Eigen::MatrixXd Q(p, p);
  rng.fill_normal(Q.data(), static_cast<std::size_t>(p) * p);
  Q *= std::sqrt(alpha);
  Q.diagonal().array() += 1.0;
  return Q;
}

double draw_inverse_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw ConfigError("inverse gamma needs positive shape and rate");
  return 1.0 / rng.gamma_rate(shape, rate);
}

double log_pdf_gamma(double x, double shape, double rate) {
  if (x <= 0.0) return -INFINITY;
  return shape * std::log(rate) - std::lgamma(shape) +
         (shape - 1.0) * std::log(x) - rate * x;
}

double log_pdf_inverse_gamma(double x, double shape, double rate) {
  if (x <= 0.0) return -INFINITY;
  return shape * std::log(rate) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - rate / x;
}

double log_pdf_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * d * d / var;
}

double log_pdf_mvn_zero(const Eigen::VectorXd& y,
                        const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const int p = static_cast<int>(y.size());
  const auto& L = llt.matrixLLT();
  double logdet = 0.0;
  for (int i = 0; i < p; ++i) logdet += std::log(L(i, i));
  const Eigen::VectorXd w = llt.matrixL().solve(y);
  return -0.5 * p * std::log(2.0 * M_PI) - logdet - 0.5 * w.squaredNorm();
}

}  // namespace pfa
