#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pfa/dataset.hpp"
#include "pfa/state.hpp"

namespace pfa {

// Block-sparse ground-truth loadings: column c loads rows
// [c*step, c*step + block) with value 1, so adjacent columns overlap by
// (block - step) rows. Fixture 1 is 21x5 (block 5, step 4), fixture 2 is
// 128x5 (block 28, step 25).
struct LoadingFixture {
  int which = 1;
  Eigen::MatrixXd matrix;
  int block = 0;
  int step = 0;
};

LoadingFixture make_loading_fixture(int which);

struct SimulatedData {
  Dataset data;                      // raw (uncentered) observations
  Eigen::MatrixXd true_loadings;
  std::vector<Eigen::MatrixXd> true_Q;  // per group or per observation
  double alpha0 = 0.0;
};

// Y_i = Lambda0 eta_i + eps_i, eta ~ N(0, I_5), eps ~ N(0, sigma^2 I_p).
SimulatedData gen_single_group(const LoadingFixture& fixture, int n,
                               double sigma, std::uint64_t seed);

// n observations split into J equal groups; group j observes Q_j0^{-1} (Lambda0
// eta + eps) so that Q_j0 Y follows the shared model; Q_10 = I. Entries of the
// group-specific alpha can be scaled per group (e.g. one inflated group).
struct MultigroupOptions {
  int n = 500;
  int n_groups = 10;
  double sigma = 1.0;
  std::vector<double> group_alpha_scale;  // empty = all ones
};

SimulatedData gen_multigroup_perturbed(const LoadingFixture& fixture,
                                       double alpha0, std::uint64_t seed,
                                       const MultigroupOptions& opts = {});

// As gen_multigroup_perturbed, but the last two groups draw their shared-scale
// data from the first three loading columns only.
SimulatedData gen_partially_shared(const LoadingFixture& fixture, double alpha0,
                                   std::uint64_t seed,
                                   const MultigroupOptions& opts = {});

enum class AdditiveVariant {
  SeparateFactors,  // Y = Lambda eta1 + Psi_j eta2 + eps
  AddedLoadings,    // Y = (Lambda + Psi_j) eta + eps
};

// Group-specific additive perturbations Psi_j with i.i.d. N(psi_mean,
// psi_sd^2) entries, same group layout as the multiplicative case.
SimulatedData gen_additive(const LoadingFixture& fixture, double psi_mean,
                           double psi_sd, std::uint64_t seed,
                           AdditiveVariant variant,
                           const MultigroupOptions& opts = {});

// Per-observation perturbations Q_i0 ~ MN(I, alpha0 I, alpha0 I).
SimulatedData gen_observation_perturbed(const LoadingFixture& fixture,
                                        double alpha0, std::uint64_t seed,
                                        int n = 500, double sigma = 1.0);

// Generic generator from any model state; counts gives the number of
// observations per group (group/None mode) or the total (observation mode,
// with fresh prior-drawn perturbations).
SimulatedData gen_from_model(const ModelState& state,
                             const std::vector<int>& counts,
                             std::uint64_t seed);

}  // namespace pfa
