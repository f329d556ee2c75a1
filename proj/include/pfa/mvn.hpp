#pragma once

#include <Eigen/Dense>

namespace pfa {

// log N(w; 0, Lambda diag(e) Lambda^T + diag(sigma2)) for every row of W.
// Uses the Woodbury identity when k < p, dense Cholesky otherwise.
Eigen::VectorXd lowrank_mvn_loglik(const Eigen::MatrixXd& W,
                                   const Eigen::MatrixXd& Lambda,
                                   const Eigen::VectorXd& e,
                                   const Eigen::VectorXd& sigma2);

// log N(w; 0, C) for every row of W, dense covariance.
Eigen::VectorXd dense_mvn_loglik(const Eigen::MatrixXd& W,
                                 const Eigen::MatrixXd& C);

}  // namespace pfa
