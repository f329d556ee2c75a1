#include "pfa/hyper.hpp"

#include "pfa/errors.hpp"

namespace pfa {

std::string to_string(PerturbationMode mode) {
  switch (mode) {
    case PerturbationMode::None: return "none";
    case PerturbationMode::Group: return "group";
    case PerturbationMode::Observation: return "observation";
  }
  return "none";
}

PerturbationMode perturbation_mode_from_string(const std::string& s) {
  if (s == "none") return PerturbationMode::None;
  if (s == "group") return PerturbationMode::Group;
  if (s == "observation") return PerturbationMode::Observation;
  throw ConfigError("unknown perturbation mode '" + s +
                    "' (expected none|group|observation)");
}

void Hyperparameters::validate(int p) const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0))
      throw ConfigError(std::string(name) + " must be positive");
  };
  positive(nu1, "nu1");
  positive(kappa1, "kappa1");
  positive(u, "u");
  positive(b_e, "b_e");
  positive(a_sigma, "a_sigma");
  positive(b_sigma, "b_sigma");
  positive(zeta, "zeta");
  if (!(kappa2 > 1.0))
    throw ConfigError("kappa2 must exceed 1 (column shrinkage must increase)");
  if (alpha_mode == AlphaMode::Fixed) {
    positive(alpha, "alpha");
  } else {
    positive(a_alpha, "a_alpha");
    positive(b_alpha, "b_alpha");
  }
  if (k_init < 1) throw ConfigError("k_init must be at least 1");
  if (k_init > p)
    throw ConfigError("k_init = " + std::to_string(k_init) +
                      " exceeds the number of variables p = " +
                      std::to_string(p));
  if (burn_in < 0 || n_iter <= burn_in)
    throw ConfigError("need n_iter > burn_in >= 0");
}

void SamplerConfig::validate(int p) const { hyper.validate(p); }

}  // namespace pfa
