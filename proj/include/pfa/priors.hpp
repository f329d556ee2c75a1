#pragma once

#include <Eigen/Dense>

#include "pfa/hyper.hpp"
#include "pfa/rng.hpp"

namespace pfa {

struct MgpDraw {
  Eigen::MatrixXd Lambda;  // p x k
  Eigen::MatrixXd phi;     // p x k, Gamma(nu1, nu1)
  Eigen::VectorXd delta;   // k, Gamma(kappa1,1) then Gamma(kappa2,1)
  Eigen::VectorXd tau;     // running products
};

// Multiplicative gamma process prior draw:
// lambda_lk | phi, tau ~ N(0, 1/(phi_lk tau_k)).
MgpDraw draw_mgp_loadings(const Hyperparameters& hyper, int p, int k, Rng& rng);

// Q ~ MN(I_p, U, V) with isotropic U = V; entries independent N(I_ab, alpha)
// where alpha is the per-entry variance, so ||Q - I||_F^2 / alpha ~ chi^2_{p^2}.
Eigen::MatrixXd draw_perturbation(double alpha, int p, Rng& rng);

// IG(shape, rate): density proportional to x^{-shape-1} exp(-rate/x).
double draw_inverse_gamma(double shape, double rate, Rng& rng);

double log_pdf_gamma(double x, double shape, double rate);
double log_pdf_inverse_gamma(double x, double shape, double rate);
double log_pdf_normal(double x, double mean, double var);

// log N(y; 0, C) given the Cholesky factor L of C.
double log_pdf_mvn_zero(const Eigen::VectorXd& y,
                        const Eigen::LLT<Eigen::MatrixXd>& llt);

}  // namespace pfa
