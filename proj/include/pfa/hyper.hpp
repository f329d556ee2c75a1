#pragma once

#include <cstdint>
#include <string>

namespace pfa {

enum class PerturbationMode { None, Group, Observation };

std::string to_string(PerturbationMode mode);
PerturbationMode perturbation_mode_from_string(const std::string& s);

enum class AlphaMode { Fixed, Learned };

// Prior and tuning constants. Defaults follow the usual shrinkage-prior
// recommendations: kappa1 = 2.1, kappa2 = 3.1 so that column shrinkage
// increases with the column index, IG(0.1, 0.1) on residual variances,
// IG(u, 0.1) on factor variances.
struct Hyperparameters {
  double nu1 = 3.0;       // local shrinkage Gamma(nu1, nu1)
  double kappa1 = 2.1;    // delta_1 ~ Gamma(kappa1, 1)
  double kappa2 = 3.1;    // delta_i ~ Gamma(kappa2, 1), i >= 2
  double u = 10.0;        // factor variance prior shape, e ~ IG(u, b_e)
  double b_e = 0.1;
  double a_sigma = 0.1;
  double b_sigma = 0.1;

  AlphaMode alpha_mode = AlphaMode::Fixed;
  double alpha = 1e-4;    // per-entry prior variance of Q (fixed mode)
  double a_alpha = 0.1;   // IG prior on alpha (learned mode)
  double b_alpha = 0.1;

  double zeta = 1e-3;     // loading-deletion threshold
  int k_init = 10;

  double adapt_c0 = -1.0;   // adaptation probability exp(c0 + c1 * iter)
  double adapt_c1 = -5e-4;
  // iterations before rank adaptation may fire; gives shrinkage time to kill
  // surplus columns so the grow step cannot race to k = p during the
  // transient
  int adapt_start = 300;

  int burn_in = 2000;
  int n_iter = 7000;
  std::uint64_t seed = 0;

  // Throws ConfigError on violated constraints (kappa2 > 1, zeta > 0, ...).
  void validate(int p) const;
};

enum class Backend { Serial, Parallel };

struct SamplerConfig {
  Hyperparameters hyper;
  PerturbationMode mode = PerturbationMode::None;
  bool store_q = false;
  bool store_eta = false;
  // B&D special case: keeps E = I_k throughout (no factor-variance update).
  bool fix_factor_variance = false;
  bool compute_loglik_trace = true;
  Backend backend = Backend::Parallel;

  void validate(int p) const;
};

}  // namespace pfa
