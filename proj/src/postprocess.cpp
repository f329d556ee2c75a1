#include "pfa/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "pfa/errors.hpp"

namespace pfa {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<int> solve_assignment(const MatrixXd& cost) {
  // Hungarian algorithm with potentials, O(n^3).
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ConfigError("assignment cost must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

namespace {

// Optimal signed column permutation of `draw` against `ref`:
// maximizing sum_i |<ref_i, draw_pi(i)>| minimizes the Frobenius distance
// over the whole permutation x sign space.
void align_one(const MatrixXd& ref, MatrixXd& Lambda, VectorXd& e) {
  const int k = static_cast<int>(ref.cols());
  MatrixXd inner = ref.transpose() * Lambda;  // k x k
  const MatrixXd cost = -inner.cwiseAbs();
  const std::vector<int> perm = solve_assignment(cost);
  MatrixXd aligned(Lambda.rows(), k);
  VectorXd e2(k);
  for (int i = 0; i < k; ++i) {
    const int j = perm[i];
    const double sign = inner(i, j) < 0.0 ? -1.0 : 1.0;
    aligned.col(i) = sign * Lambda.col(j);
    e2[i] = e[j];
  }
  Lambda = std::move(aligned);
  e = std::move(e2);
}

int modal_rank(const PosteriorChain& chain) {
  std::map<int, int> counts;
  for (const auto& d : chain.draws) ++counts[d.k];
  int best_k = 0, best_n = -1;
  for (const auto& [k, c] : counts)
    if (c > best_n || (c == best_n && k < best_k)) {
      best_k = k;
      best_n = c;
    }
  return best_k;
}

}  // namespace

AlignedChain align_chain(const PosteriorChain& chain) {
  if (chain.draws.empty()) throw ConfigError("cannot align an empty chain");
  const int m = modal_rank(chain);

  AlignedChain out;
  std::vector<const Draw*> kept;
  for (const auto& d : chain.draws) {
    if (d.k == m)
      kept.push_back(&d);
    else
      ++out.dropped_draws;
  }
  const int nd = static_cast<int>(kept.size());

  // Reference draw: sorted column-norm profile closest to the pointwise
  // median profile.
  MatrixXd profiles(nd, m);
  for (int d = 0; d < nd; ++d) {
    VectorXd norms = kept[d]->Lambda.colwise().norm();
    std::sort(norms.data(), norms.data() + m, std::greater<double>());
    profiles.row(d) = norms.transpose();
  }
  VectorXd median(m);
  for (int c = 0; c < m; ++c) {
    std::vector<double> col(profiles.col(c).data(),
                            profiles.col(c).data() + nd);
    std::nth_element(col.begin(), col.begin() + nd / 2, col.end());
    median[c] = col[nd / 2];
  }
  int ref_idx = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int d = 0; d < nd; ++d) {
    const double dist = (profiles.row(d).transpose() - median).squaredNorm();
    if (dist < best) {
      best = dist;
      ref_idx = d;
    }
  }
  out.reference_index = ref_idx;

  // Pass 1 against the reference draw, pass 2 against the pass-1 mean.
  out.Lambda.resize(nd);
  out.e.resize(nd);
  MatrixXd ref = kept[ref_idx]->Lambda;
  MatrixXd mean = MatrixXd::Zero(ref.rows(), m);
  for (int d = 0; d < nd; ++d) {
    out.Lambda[d] = kept[d]->Lambda;
    out.e[d] = kept[d]->e;
    align_one(ref, out.Lambda[d], out.e[d]);
    mean += out.Lambda[d];
  }
  mean /= nd;
  for (int d = 0; d < nd; ++d) {
    out.Lambda[d] = kept[d]->Lambda;
    out.e[d] = kept[d]->e;
    align_one(mean, out.Lambda[d], out.e[d]);
  }

  VectorXd sig = VectorXd::Zero(kept[0]->sigma2.size());
  for (int d = 0; d < nd; ++d) sig += kept[d]->sigma2;
  out.sigma2_mean = sig / nd;
  if (chain.n_accum > 0) {
    out.Q_mean = chain.mean_Q();
    out.Qinv_mean = chain.mean_Qinv();
    out.alpha_mean = chain.sum_alpha / chain.n_accum;
  }
  return out;
}

namespace {

// Orthogonal Procrustes: the rotation R minimizing ||S R - target||_F.
MatrixXd procrustes_rotation(const MatrixXd& S, const MatrixXd& target) {
  const Eigen::JacobiSVD<MatrixXd> svd(
      S.transpose() * target, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

PointEstimate point_estimate(const AlignedChain& aligned) {
  if (aligned.Lambda.empty())
    throw ConfigError("cannot form a point estimate from an empty chain");
  const int nd = static_cast<int>(aligned.Lambda.size());
  PointEstimate est;
  est.Lambda = MatrixXd::Zero(aligned.Lambda[0].rows(), aligned.Lambda[0].cols());
  VectorXd e = VectorXd::Zero(aligned.e[0].size());
  for (int d = 0; d < nd; ++d) {
    est.Lambda += aligned.Lambda[d];
    e += aligned.e[d];
  }
  est.Lambda /= nd;
  est.e = e / nd;

  // The likelihood identifies Lambda e^{1/2} only up to near-rotations when
  // factor variances are close, so the chain wanders rotationally and a
  // plain mean of aligned draws is blurred. Refine the scaled estimate by
  // rotating each draw onto the running mean (orthogonal Procrustes); the
  // signed-permutation alignment above fixes the orientation the refinement
  // converges to.
  MatrixXd target = est.Lambda * est.e.cwiseSqrt().asDiagonal();
  for (int pass = 0; pass < 50; ++pass) {
    MatrixXd acc = MatrixXd::Zero(target.rows(), target.cols());
    for (int d = 0; d < nd; ++d) {
      const MatrixXd S =
          aligned.Lambda[d] * aligned.e[d].cwiseSqrt().asDiagonal();
      acc += S * procrustes_rotation(S, target);
    }
    acc /= nd;
    const double step = (acc - target).norm() / std::max(1e-300, target.norm());
    target = std::move(acc);
    if (step < 1e-8) break;
  }
  est.Lambda_scaled = target;

  est.sigma2 = aligned.sigma2_mean;
  est.Q = aligned.Q_mean;
  est.Qinv = aligned.Qinv_mean;
  est.alpha = aligned.alpha_mean;
  return est;
}

int effective_rank(const PosteriorChain& chain, double zeta) {
  if (chain.draws.empty()) throw ConfigError("empty chain");
  std::map<int, int> counts;
  for (const auto& d : chain.draws) {
    int active = 0;
    for (int c = 0; c < d.Lambda.cols(); ++c)
      if (std::sqrt(d.e[c]) * d.Lambda.col(c).cwiseAbs().maxCoeff() > zeta)
        ++active;
    ++counts[active];
  }
  int best_k = 0, best_n = -1;
  for (const auto& [k, c] : counts)
    if (c > best_n || (c == best_n && k < best_k)) {
      best_k = k;
      best_n = c;
    }
  return best_k;
}

double signed_permutation_error(const MatrixXd& A, const MatrixXd& B) {
  if (A.rows() != B.rows())
    throw ConfigError("matrices must have the same number of rows");
  const int k = static_cast<int>(std::max(A.cols(), B.cols()));
  MatrixXd Ap = MatrixXd::Zero(A.rows(), k), Bp = MatrixXd::Zero(A.rows(), k);
  Ap.leftCols(A.cols()) = A;
  Bp.leftCols(B.cols()) = B;
  MatrixXd cost(k, k);
  const MatrixXd inner = Ap.transpose() * Bp;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      cost(i, j) = Ap.col(i).squaredNorm() + Bp.col(j).squaredNorm() -
                   2.0 * std::abs(inner(i, j));
  const std::vector<int> perm = solve_assignment(cost);
  double err2 = 0.0;
  for (int i = 0; i < k; ++i) err2 += std::max(0.0, cost(i, perm[i]));
  return std::sqrt(err2) / A.norm();
}

}  // namespace pfa
