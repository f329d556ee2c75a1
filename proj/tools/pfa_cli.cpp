// pfa: perturbed factor analysis from the command line.
//
// Subcommands: simulate, fit, cv-alpha, diverge, predict. Every run writes a
// manifest.json holding the full configuration and seed; outputs are CSV for
// matrices and JSON for nested summaries. Exit codes: 0 ok, 2 config error,
// 3 data error, 4 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pfa/errors.hpp"
#include "pfa/evaluate.hpp"
#include "pfa/io.hpp"
#include "pfa/postprocess.hpp"
#include "pfa/sampler.hpp"
#include "pfa/simulate.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pfa;

namespace {

constexpr const char* kVersion = "0.1.0";

// Collects everything written in one run so a failure can clean up after
// itself instead of leaving partial outputs behind.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
  }
  const fs::path& dir() const { return dir_; }

  fs::path file(const std::string& name) {
    written_.push_back(dir_ / name);
    return written_.back();
  }

  void discard_all() {
    for (const auto& p : written_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

  json manifest_outputs() const {
    json out = json::array();
    for (const auto& p : written_)
      if (p.filename() != "manifest.json") out.push_back(p.filename());
    return out;
  }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
};

struct FitOptions {
  std::string input;
  std::string group_col = "group";
  bool log_transform = false;
  std::string mode = "none";
  double alpha = 1e-4;
  bool fb = false;  // learned alpha
  int iters = 7000;
  int burnin = 2000;
  int k_init = 10;
  double zeta = 1e-3;
  double u = 10.0;
  std::uint64_t seed = 0;
  std::string out = "pfa_out";
  bool emit_heatmaps = false;
  bool emit_chain = false;
  bool store_q = false;
  bool no_trace = false;
  std::string backend = "parallel";
  int threads = 0;
};

void add_fit_options(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("--input", o.input, "input CSV with a group column")
      ->required();
  cmd->add_option("--group-col", o.group_col, "group column name");
  cmd->add_flag("--log-transform", o.log_transform,
                "log-transform values before centering");
  cmd->add_option("--mode", o.mode, "none|group|observation");
  cmd->add_option("--alpha", o.alpha, "perturbation variance (fixed-alpha)");
  cmd->add_flag("--fb", o.fb, "fully Bayesian: put an IG prior on alpha");
  cmd->add_option("--iters", o.iters, "Gibbs iterations");
  cmd->add_option("--burnin", o.burnin, "burn-in iterations");
  cmd->add_option("--k-init", o.k_init, "initial number of factors");
  cmd->add_option("--zeta", o.zeta, "loading-deletion threshold");
  cmd->add_option("--u", o.u, "factor-variance prior shape");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_flag("--emit-heatmaps", o.emit_heatmaps, "write PPM heatmaps");
  cmd->add_flag("--emit-chain", o.emit_chain, "write per-draw CSV shards");
  cmd->add_flag("--store-q", o.store_q, "keep per-draw perturbations");
  cmd->add_flag("--no-trace", o.no_trace, "skip the log-likelihood trace");
  cmd->add_option("--backend", o.backend, "parallel|serial kernels");
  cmd->add_option("--threads", o.threads, "OpenMP thread count (0 = default)");
}

SamplerConfig make_config(const FitOptions& o) {
  SamplerConfig cfg;
  cfg.mode = perturbation_mode_from_string(o.mode);
  cfg.hyper.alpha_mode = o.fb ? AlphaMode::Learned : AlphaMode::Fixed;
  cfg.hyper.alpha = o.alpha;
  cfg.hyper.n_iter = o.iters;
  cfg.hyper.burn_in = o.burnin;
  cfg.hyper.k_init = o.k_init;
  cfg.hyper.zeta = o.zeta;
  cfg.hyper.u = o.u;
  cfg.hyper.seed = o.seed;
  cfg.store_q = o.store_q || cfg.mode == PerturbationMode::Group;
  cfg.compute_loglik_trace = !o.no_trace;
  if (o.backend == "serial")
    cfg.backend = Backend::Serial;
  else if (o.backend == "parallel")
    cfg.backend = Backend::Parallel;
  else
    throw ConfigError("unknown backend '" + o.backend + "'");
#ifdef _OPENMP
  if (o.threads > 0) omp_set_num_threads(o.threads);
#endif
  return cfg;
}

json config_json(const FitOptions& o, const SamplerConfig& cfg) {
  return json{{"mode", o.mode},
              {"alpha", cfg.hyper.alpha},
              {"alpha_mode", o.fb ? "learned" : "fixed"},
              {"iters", cfg.hyper.n_iter},
              {"burnin", cfg.hyper.burn_in},
              {"k_init", cfg.hyper.k_init},
              {"zeta", cfg.hyper.zeta},
              {"u", cfg.hyper.u},
              {"seed", cfg.hyper.seed},
              {"backend", o.backend},
              {"group_col", o.group_col},
              {"log_transform", o.log_transform}};
}

void write_manifest(OutputDir& out, const std::string& command,
                    const json& config) {
  json m{{"tool", "pfa"},
         {"version", kVersion},
         {"command", command},
         {"config", config},
         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                       std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION)},
         {"outputs", out.manifest_outputs()}};
  atomic_write_text(out.file("manifest.json"), m.dump(2));
}

std::vector<std::string> numbered_header(const std::string& prefix, int n,
                                         const std::string& first = "") {
  std::vector<std::string> h;
  if (!first.empty()) h.push_back(first);
  for (int i = 1; i <= n; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

void emit_fit_outputs(OutputDir& out, const Dataset& data,
                      const PosteriorChain& chain, const FitOptions& o) {
  const AlignedChain aligned = align_chain(chain);
  const PointEstimate est = point_estimate(aligned);
  const int k = static_cast<int>(est.Lambda.cols());

  write_csv_matrix(out.file("loadings_scaled.csv"), est.Lambda_scaled,
                   numbered_header("f", k, "variable"), data.variable_names);
  write_csv_matrix(out.file("loadings.csv"), est.Lambda,
                   numbered_header("f", k, "variable"), data.variable_names);
  write_csv_matrix(out.file("e_hat.csv"), est.e.transpose(),
                   numbered_header("f", k));
  write_csv_matrix(out.file("sigma2_hat.csv"), est.sigma2.transpose(),
                   numbered_header("v", data.p()));
  write_csv_matrix(out.file("center_vector.csv"),
                   data.center_vector.transpose(),
                   numbered_header("v", data.p()));

  json summary{
      {"n", data.n()},
      {"p", data.p()},
      {"groups", data.group_names},
      {"draws", chain.draws.size()},
      {"dropped_draws", aligned.dropped_draws},
      {"effective_rank", effective_rank(chain, o.zeta)},
      {"alpha_hat", est.alpha},
      {"final_rank", chain.meta.rank_trace.back()},
      {"loglik_convention", chain.meta.loglik_convention},
  };
  if (chain.meta.loglik_trace.size() > 0) {
    summary["loglik_trace_last"] =
        chain.meta.loglik_trace[chain.meta.loglik_trace.size() - 1];
    write_csv_matrix(out.file("loglik_trace.csv"), chain.meta.loglik_trace,
                     {"loglik"});
  }

  if (chain.meta.mode == PerturbationMode::Group) {
    const auto Qm = chain.mean_Q();
    const auto Qinvm = chain.mean_Qinv();
    for (std::size_t j = 0; j < Qm.size(); ++j) {
      write_csv_matrix(out.file("q_hat_" + data.group_names[j] + ".csv"),
                       Qm[j], numbered_header("c", data.p()));
      write_csv_matrix(out.file("qinv_hat_" + data.group_names[j] + ".csv"),
                       Qinvm[j], numbered_header("c", data.p()));
    }
    const DivergenceMatrix D = divergence_matrix(chain);
    write_csv_matrix(out.file("divergence.csv"), D.d,
                     numbered_header("g", data.n_groups(), "group"),
                     data.group_names);
    write_csv_matrix(out.file("edge_weights.csv"), D.edge_weights,
                     numbered_header("g", data.n_groups(), "group"),
                     data.group_names);
    write_csv_matrix(out.file("divergence_perdraw.csv"), D.d_per_draw,
                     numbered_header("g", data.n_groups(), "group"),
                     data.group_names);
    if (o.emit_heatmaps) write_ppm_heatmap(out.file("divergence.ppm"), D.d);
  }

  if (o.emit_heatmaps)
    write_ppm_heatmap(out.file("loadings_scaled.ppm"), est.Lambda_scaled);

  if (o.emit_chain) {
    const int nd = static_cast<int>(chain.draws.size());
    const int p = data.p();
    Eigen::MatrixXd lam(nd, p * k), evar(nd, k), sig(nd, data.p());
    Eigen::MatrixXd scalars(nd, 3);
    for (int d = 0; d < nd; ++d) {
      lam.row(d) = Eigen::Map<const Eigen::VectorXd>(
          chain.draws[d].Lambda.data(), p * k);
      evar.row(d) = chain.draws[d].e.transpose();
      sig.row(d) = chain.draws[d].sigma2.transpose();
      scalars(d, 0) = d;
      scalars(d, 1) = chain.draws[d].k;
      scalars(d, 2) = chain.draws[d].alpha;
    }
    write_csv_matrix(out.file("chain_lambda_colmajor.csv"), lam);
    write_csv_matrix(out.file("chain_e.csv"), evar);
    write_csv_matrix(out.file("chain_sigma2.csv"), sig);
    write_csv_matrix(out.file("chain_scalars.csv"), scalars,
                     {"draw", "k", "alpha"});
  }

  atomic_write_text(out.file("summary.json"), summary.dump(2));
}

// case 4: rebuild a model state from a previous fit's point estimate
ModelState state_from_fit_dir(const fs::path& dir) {
  ModelState st;
  st.Lambda = read_csv_matrix(dir / "loadings.csv").values;
  st.e = read_csv_matrix(dir / "e_hat.csv").values.row(0).transpose();
  st.sigma2 =
      read_csv_matrix(dir / "sigma2_hat.csv").values.row(0).transpose();
  st.phi = Eigen::MatrixXd::Ones(st.p(), st.k());
  st.delta = Eigen::VectorXd::Ones(st.k());
  st.recompute_tau();
  st.eta = Eigen::MatrixXd::Zero(0, st.k());
  std::ifstream manifest(dir / "manifest.json");
  if (!manifest) throw DataError("no manifest.json in " + dir.string());
  const json m = json::parse(manifest);
  st.alpha = m["config"].value("alpha", 1e-4);
  st.mode = perturbation_mode_from_string(m["config"].value("mode", "none"));
  if (st.mode == PerturbationMode::Group) {
    std::ifstream sf(dir / "summary.json");
    if (!sf) throw DataError("no summary.json in " + dir.string());
    const json summary = json::parse(sf);
    for (const auto& g : summary["groups"]) {
      const fs::path qp = dir / ("q_hat_" + g.get<std::string>() + ".csv");
      st.Q.push_back(read_csv_matrix(qp).values);
    }
  }
  return st;
}

int run_simulate(const std::string& cas, int fixture, int n, int groups,
                 double sigma, double alpha0, double psi_mean, double psi_sd,
                 int outlier_group, double outlier_scale,
                 const std::string& model_dir, std::uint64_t seed,
                 const std::string& outdir) {
  OutputDir out(outdir);
  try {
    SimulatedData sim;
    MultigroupOptions opts;
    opts.n = n;
    opts.n_groups = groups;
    opts.sigma = sigma;
    if (outlier_group > 0) {
      opts.group_alpha_scale.assign(groups, 1.0);
      opts.group_alpha_scale.at(outlier_group - 1) = outlier_scale;
    }
    const LoadingFixture fix = make_loading_fixture(fixture);
    if (cas == "1")
      sim = gen_single_group(fix, n, sigma, seed);
    else if (cas == "2")
      sim = gen_multigroup_perturbed(fix, alpha0, seed, opts);
    else if (cas == "2.1")
      sim = gen_partially_shared(fix, alpha0, seed, opts);
    else if (cas == "3")
      sim = gen_additive(fix, psi_mean, psi_sd, seed,
                         AdditiveVariant::SeparateFactors, opts);
    else if (cas == "s1")
      sim = gen_additive(fix, psi_mean, psi_sd, seed,
                         AdditiveVariant::AddedLoadings, opts);
    else if (cas == "s2")
      sim = gen_observation_perturbed(fix, alpha0, seed, n, sigma);
    else if (cas == "4") {
      if (model_dir.empty())
        throw ConfigError("--case 4 needs --model-dir from a previous fit");
      const ModelState st = state_from_fit_dir(model_dir);
      const int J = st.mode == PerturbationMode::Group
                        ? static_cast<int>(st.Q.size())
                        : 1;
      std::vector<int> counts(J, n / J);
      for (int j = 0; j < n % J; ++j) ++counts[j];
      sim = gen_from_model(st, counts, seed);
    } else {
      throw ConfigError("unknown case '" + cas +
                        "' (expected 1, 2, 2.1, 3, 4, s1, s2)");
    }

    write_dataset_csv(out.file("data.csv"), sim.data);
    if (sim.true_loadings.size() > 0)
      write_csv_matrix(out.file("true_loadings.csv"), sim.true_loadings);
    if (!sim.true_Q.empty() && sim.true_Q.size() <= 64)
      for (std::size_t j = 0; j < sim.true_Q.size(); ++j)
        write_csv_matrix(out.file("true_q_" + std::to_string(j + 1) + ".csv"),
                         sim.true_Q[j]);
    write_manifest(out, "simulate",
                   json{{"case", cas},
                        {"fixture", fixture},
                        {"n", n},
                        {"groups", groups},
                        {"sigma", sigma},
                        {"alpha0", alpha0},
                        {"psi_mean", psi_mean},
                        {"psi_sd", psi_sd},
                        {"outlier_group", outlier_group},
                        {"outlier_scale", outlier_scale},
                        {"seed", seed}});
    return 0;
  } catch (...) {
    out.discard_all();
    throw;
  }
}

int run_fit(const FitOptions& o) {
  OutputDir out(o.out);
  try {
    const Dataset data = ingest_csv(o.input, o.group_col, o.log_transform);
    const SamplerConfig cfg = make_config(o);
    const PosteriorChain chain = run_chain(data, cfg);
    emit_fit_outputs(out, data, chain, o);
    write_manifest(out, "fit", config_json(o, cfg));
    return 0;
  } catch (...) {
    out.discard_all();
    throw;
  }
}

int run_cv_alpha(const FitOptions& o, const std::vector<double>& grid,
                 int splits) {
  OutputDir out(o.out);
  try {
    const Dataset data = ingest_csv(o.input, o.group_col, o.log_transform);
    const SamplerConfig cfg = make_config(o);
    if (cfg.mode == PerturbationMode::None)
      throw ConfigError("cv-alpha needs --mode group or observation");
    if (o.fb) throw ConfigError("--fb and --alpha-grid are exclusive");
    const CvResult res = cv_alpha(data, grid, splits, cfg);

    Eigen::MatrixXd table(res.table.size(), 3);
    for (std::size_t i = 0; i < res.table.size(); ++i) {
      table(i, 0) = res.table[i].alpha;
      table(i, 1) = res.table[i].split;
      table(i, 2) = res.table[i].loglik;
    }
    write_csv_matrix(out.file("cv_scores.csv"), table,
                     {"alpha", "split", "loglik"});
    const json summary{{"chosen_alpha", res.chosen_alpha},
                       {"grid", res.grid},
                       {"mean_loglik", res.mean_loglik},
                       {"se_loglik", res.se_loglik},
                       {"tie_tolerance", res.tie_tolerance},
                       {"splits", splits}};
    atomic_write_text(out.file("cv_summary.json"), summary.dump(2));
    json cj = config_json(o, cfg);
    cj["alpha_grid"] = grid;
    cj["splits"] = splits;
    write_manifest(out, "cv-alpha", cj);
    std::cout << "chosen alpha: " << res.chosen_alpha << "\n";
    return 0;
  } catch (...) {
    out.discard_all();
    throw;
  }
}

int run_diverge(const FitOptions& o) {
  OutputDir out(o.out);
  try {
    const Dataset data = ingest_csv(o.input, o.group_col, o.log_transform);
    FitOptions o2 = o;
    o2.mode = "group";
    const SamplerConfig cfg = make_config(o2);
    const PosteriorChain chain = run_chain(data, cfg);
    emit_fit_outputs(out, data, chain, o2);

    // exact pairwise KL at the posterior-mean state
    const PointEstimate est = point_estimate(align_chain(chain));
    ModelState st;
    st.mode = PerturbationMode::Group;
    st.Lambda = est.Lambda;
    st.e = est.e;
    st.sigma2 = est.sigma2;
    st.Q = est.Q;
    st.phi = Eigen::MatrixXd::Ones(st.p(), st.k());
    st.delta = Eigen::VectorXd::Ones(st.k());
    st.recompute_tau();
    const int J = data.n_groups();
    Eigen::MatrixXd kl(J, J);
    for (int j = 0; j < J; ++j)
      for (int l = 0; l < J; ++l)
        kl(j, l) = j == l ? 0.0 : kl_group_marginals(st, j, l);
    write_csv_matrix(out.file("kl.csv"), kl, numbered_header("g", J, "group"),
                     data.group_names);
    write_manifest(out, "diverge", config_json(o2, cfg));
    return 0;
  } catch (...) {
    out.discard_all();
    throw;
  }
}

int run_predict(const FitOptions& o, const std::string& test_path) {
  OutputDir out(o.out);
  try {
    const Dataset train = ingest_csv(o.input, o.group_col, o.log_transform);
    const SamplerConfig cfg = make_config(o);
    const PosteriorChain chain = run_chain(train, cfg);

    Dataset test = ingest_csv(test_path, o.group_col, o.log_transform);
    // score the test set in the training centering
    test.values = apply_centering(
        test.values.rowwise() + test.center_vector.transpose(),
        train.center_vector);
    test.centered = false;
    test.center_vector = train.center_vector;

    const PredictiveLoglik pll = predictive_loglik(chain, test);
    const json summary{{"total", pll.total},
                       {"per_point", pll.per_point},
                       {"n_points", pll.n_points},
                       {"n_draws", pll.n_draws},
                       {"convention", pll.convention}};
    atomic_write_text(out.file("predict.json"), summary.dump(2));
    json cj = config_json(o, cfg);
    cj["test"] = test_path;
    write_manifest(out, "predict", cj);
    std::cout << "predictive log-likelihood: " << pll.total << "\n";
    return 0;
  } catch (...) {
    out.discard_all();
    throw;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed factor analysis"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "generate simulation-study data");
  std::string cas = "1", model_dir;
  int fixture = 1, n = 500, groups = 10, outlier_group = 0;
  double sigma = 1.0, alpha0 = 1e-4, psi_mean = -0.5, psi_sd = 0.8,
         outlier_scale = 100.0;
  std::uint64_t sim_seed = 0;
  std::string sim_out = "pfa_sim";
  sim->add_option("--case", cas, "1|2|2.1|3|4|s1|s2");
  sim->add_option("--fixture", fixture, "loading fixture (1: 21x5, 2: 128x5)");
  sim->add_option("--n", n, "observations");
  sim->add_option("--groups", groups, "number of groups");
  sim->add_option("--sigma", sigma, "residual standard deviation");
  sim->add_option("--alpha0", alpha0, "true perturbation variance");
  sim->add_option("--psi-mean", psi_mean, "additive perturbation mean");
  sim->add_option("--psi-sd", psi_sd, "additive perturbation sd");
  sim->add_option("--outlier-group", outlier_group,
                  "1-based group given an inflated perturbation (0 = none)");
  sim->add_option("--outlier-scale", outlier_scale,
                  "variance multiplier for the outlier group");
  sim->add_option("--model-dir", model_dir, "fit directory for --case 4");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--out", sim_out, "output directory");

  auto* fit = app.add_subcommand("fit", "run the Gibbs sampler on a CSV");
  FitOptions fo;
  add_fit_options(fit, fo);

  auto* cv = app.add_subcommand("cv-alpha",
                                "choose alpha by 50-50 split cross-validation");
  FitOptions co;
  std::vector<double> grid;
  int splits = 10;
  add_fit_options(cv, co);
  cv->add_option("--alpha-grid", grid, "candidate alphas")->required();
  cv->add_option("--splits", splits, "number of 50-50 splits");

  auto* dv = app.add_subcommand(
      "diverge", "fit in group mode and emit divergence diagnostics");
  FitOptions dvo;
  add_fit_options(dv, dvo);

  auto* pr = app.add_subcommand(
      "predict",
      "fit on --input and score --test by predictive log-likelihood");
  FitOptions po;
  std::string test_path;
  add_fit_options(pr, po);
  pr->add_option("--test", test_path, "held-out CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim)
      return run_simulate(cas, fixture, n, groups, sigma, alpha0, psi_mean,
                          psi_sd, outlier_group, outlier_scale, model_dir,
                          sim_seed, sim_out);
    if (*fit) return run_fit(fo);
    if (*cv) return run_cv_alpha(co, grid, splits);
    if (*dv) return run_diverge(dvo);
    if (*pr) return run_predict(po, test_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
