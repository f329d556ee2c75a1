#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pfa/state.hpp"

namespace pfa {

// Loading draws with harmonized column order and signs. Each aligned draw is
// an exact signed column permutation of its original.
struct AlignedChain {
  std::vector<Eigen::MatrixXd> Lambda;  // aligned draws
  std::vector<Eigen::VectorXd> e;       // permuted with the same assignment
  int reference_index = 0;
  int dropped_draws = 0;                // draws removed by rank filtering

  // carried over from the source chain for point estimates
  Eigen::VectorXd sigma2_mean;
  std::vector<Eigen::MatrixXd> Q_mean;
  std::vector<Eigen::MatrixXd> Qinv_mean;
  double alpha_mean = 0.0;
};

// Drops draws whose k differs from the modal rank, then aligns every draw to
// a reference by the optimal signed column permutation (linear assignment on
// absolute column inner products, signs from the inner-product sign; exact
// minimizer of the Frobenius distance). Reference: the draw whose sorted
// column-norm profile is closest to the pointwise median profile, refined by
// one re-alignment pass against the mean of the first pass.
AlignedChain align_chain(const PosteriorChain& chain);

struct PointEstimate {
  Eigen::MatrixXd Lambda_scaled;  // posterior mean Lambda * diag(mean e)^{1/2}
  Eigen::MatrixXd Lambda;         // posterior mean of aligned loadings
  Eigen::VectorXd e;
  Eigen::VectorXd sigma2;
  std::vector<Eigen::MatrixXd> Q;     // elementwise posterior mean of Q_j
  std::vector<Eigen::MatrixXd> Qinv;  // and of Q_j^{-1} (both reported)
  double alpha = 0.0;
};

PointEstimate point_estimate(const AlignedChain& aligned);

// Modal count, across draws, of columns with some |loading| > zeta.
int effective_rank(const PosteriorChain& chain, double zeta);

// Minimum-cost assignment (Hungarian, O(n^3)). cost is square; returns for
// each row the assigned column. Exposed for tests and column matching.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

// Relative Frobenius error between A and B minimized over signed column
// permutations of B (columns padded with zeros when widths differ).
double signed_permutation_error(const Eigen::MatrixXd& A,
                                const Eigen::MatrixXd& B);

}  // namespace pfa
