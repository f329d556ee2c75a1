#include "pfa/mvn.hpp"

#include <cmath>

#include "pfa/errors.hpp"

namespace pfa {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd dense_mvn_loglik(const MatrixXd& W, const MatrixXd& C) {
  const int p = static_cast<int>(C.rows());
  const Eigen::LLT<MatrixXd> llt(C);
  if (llt.info() != Eigen::Success)
    throw NumericalError("covariance is not positive definite");
  double logdet = 0.0;
  for (int i = 0; i < p; ++i) logdet += std::log(llt.matrixLLT()(i, i));
  const double c0 = -0.5 * p * std::log(2.0 * M_PI) - logdet;
  const MatrixXd sol = llt.matrixL().solve(W.transpose());  // p x n
  return (c0 - 0.5 * sol.colwise().squaredNorm().array()).transpose();
}

VectorXd lowrank_mvn_loglik(const MatrixXd& W, const MatrixXd& Lambda,
                            const VectorXd& e, const VectorXd& sigma2) {
  const int p = static_cast<int>(Lambda.rows());
  const int k = static_cast<int>(Lambda.cols());
  if (k >= p) {
    MatrixXd C = Lambda * e.asDiagonal() * Lambda.transpose();
    C.diagonal() += sigma2;
    return dense_mvn_loglik(W, C);
  }
  // H^{-1} = S^{-1} - S^{-1} L (E^{-1} + L^T S^{-1} L)^{-1} L^T S^{-1}
  // det H  = det S * det E * det(E^{-1} + L^T S^{-1} L)
  const VectorXd sinv = sigma2.cwiseInverse();
  const MatrixXd B = Lambda.transpose() * sinv.asDiagonal();  // k x p
  MatrixXd M = B * Lambda;
  M.diagonal() += e.cwiseInverse();
  const Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw NumericalError("low-rank covariance is not positive definite");
  double logdet = sigma2.array().log().sum() + e.array().log().sum();
  for (int i = 0; i < k; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
  const double c0 = -0.5 * p * std::log(2.0 * M_PI) - 0.5 * logdet;
  const MatrixXd V = B * W.transpose();                      // k x n
  const MatrixXd R = llt.matrixL().solve(V);                 // k x n
  const VectorXd quad_full = W.array().square().matrix() * sinv;
  VectorXd out(W.rows());
  for (int i = 0; i < W.rows(); ++i)
    out[i] = c0 - 0.5 * (quad_full[i] - R.col(i).squaredNorm());
  return out;
}

}  // namespace pfa
