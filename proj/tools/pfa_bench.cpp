// Micro-benchmark: serial reference kernels vs the OpenMP kernels on
// synthetic problems of increasing size. The serial implementations
// recompute every conditional from scratch; the parallel ones share
// precomputed factors and thread the per-item loops.

#include <chrono>
#include <cstdio>
#include <functional>

#include "pfa/kernels.hpp"
#include "pfa/priors.hpp"
#include "pfa/simulate.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace pfa;
namespace K = pfa::kernels;
using Eigen::MatrixXd;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

struct Problem {
  ModelState st;
  Dataset data;
  MatrixXd W;
  Hyperparameters hy;
};

Problem make_problem(int p, int n, int k, int J) {
  Problem pr;
  Rng rng(1234);
  pr.data.values.resize(n, p);
  rng.fill_normal(pr.data.values.data(), pr.data.values.size());
  for (int i = 0; i < n; ++i) pr.data.group.push_back(i % J);
  for (int j = 0; j < J; ++j)
    pr.data.group_names.push_back("g" + std::to_string(j + 1));
  for (int c = 0; c < p; ++c)
    pr.data.variable_names.push_back("v" + std::to_string(c + 1));

  pr.st.mode = J > 1 ? PerturbationMode::Group : PerturbationMode::None;
  MgpDraw mgp = draw_mgp_loadings(pr.hy, p, k, rng);
  pr.st.Lambda = mgp.Lambda;
  pr.st.phi = mgp.phi;
  pr.st.delta = mgp.delta;
  pr.st.tau = mgp.tau;
  pr.st.e = Eigen::VectorXd::Ones(k);
  pr.st.sigma2 = Eigen::VectorXd::Ones(p);
  pr.st.alpha = 1e-2;
  if (J > 1) pr.st.Q.assign(J, MatrixXd::Identity(p, p));
  pr.st.eta.resize(n, k);
  rng.fill_normal(pr.st.eta.data(), pr.st.eta.size());
  pr.W = K::perturbed_data(pr.st, pr.data);
  return pr;
}

void bench_kernel(const char* name, Problem& pr, int reps,
                  const std::function<void(ModelState&, Rng&, Backend)>& fn) {
  const double serial = time_ms(
      [&] {
        ModelState s = pr.st;
        Rng r(7);
        fn(s, r, Backend::Serial);
      },
      reps);
  const double parallel = time_ms(
      [&] {
        ModelState s = pr.st;
        Rng r(7);
        fn(s, r, Backend::Parallel);
      },
      reps);
  std::printf("  %-22s %10.3f %10.3f %8.2fx\n", name, serial, parallel,
              serial / parallel);
}

void bench_size(int p, int n, int k, int J, int reps) {
  Problem pr = make_problem(p, n, k, J);
  std::printf("p=%d n=%d k=%d J=%d\n", p, n, k, J);
  std::printf("  %-22s %10s %10s %9s\n", "kernel", "serial ms", "omp ms",
              "speedup");
  bench_kernel("update_factors", pr, reps,
               [&](ModelState& s, Rng& r, Backend b) {
                 K::update_factors(s, pr.data, pr.W, r, b);
               });
  bench_kernel("update_loadings", pr, reps,
               [&](ModelState& s, Rng& r, Backend b) {
                 K::update_loadings(s, pr.data, pr.W, r, b);
               });
  bench_kernel("update_residual_var", pr, reps,
               [&](ModelState& s, Rng& r, Backend b) {
                 K::update_residual_variance(s, pr.data, pr.W, pr.hy, r, b);
               });
  if (J > 1)
    bench_kernel("perturbation sweep", pr, reps,
                 [&](ModelState& s, Rng& r, Backend b) {
                   MatrixXd W = pr.W;
                   K::update_perturbations_group(s, pr.data, W, r, b);
                 });
  std::printf("\n");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both columns run serially\n\n");
#endif
  bench_size(21, 500, 10, 10, 20);
  bench_size(64, 500, 10, 10, 10);
  bench_size(128, 500, 10, 1, 10);
  return 0;
}
