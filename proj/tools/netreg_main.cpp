#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "netreg/blockdetect.hpp"
#include "netreg/censored.hpp"
#include "netreg/covariance.hpp"
#include "netreg/errors.hpp"
#include "netreg/harness.hpp"
#include "netreg/json_writer.hpp"
#include "netreg/network.hpp"
#include "netreg/ols.hpp"
#include "netreg/parallel.hpp"
#include "netreg/simgen.hpp"

namespace {

using namespace netreg;

void write_text(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw ValidationError("empty integer list: " + s);
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  if (out.empty()) throw ValidationError("empty list: " + s);
  return out;
}

CovariateFamily parse_family(const std::string& s) {
  if (s == "match") return CovariateFamily::BinaryMatch;
  if (s == "absdiff") return CovariateFamily::AbsDiff;
  if (s == "pairnormal") return CovariateFamily::PairwiseNormal;
  throw ValidationError("unknown covariate family: " + s);
}

CovariateSetting parse_setting(const std::string& s) {
  if (s == "independent") return CovariateSetting::Independent;
  if (s == "high-high") return CovariateSetting::HighHigh;
  if (s == "high-low") return CovariateSetting::HighLow;
  throw ValidationError("unknown covariate setting: " + s);
}

Json params_json(const std::map<ConfigKey, double>& params) {
  Json j = Json::object();
  for (const auto& [key, value] : params) j.set(key.to_string(), value);
  return j;
}

Json counts_json(const std::map<ConfigKey, long long>& counts) {
  Json j = Json::object();
  for (const auto& [key, value] : counts) j.set(key.to_string(), value);
  return j;
}

Json assignment_json(const BlockAssignment& g) {
  Json arr = Json::array();
  for (int b : g.labels) arr.push_back(b + 1);
  return arr;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

DirectedNetwork load_network_or_die(const std::string& path) {
  auto parsed = read_network_csv(path);
  if (!parsed.network) {
    for (const auto& e : parsed.errors) std::cerr << "error: " << e << "\n";
    throw ValidationError("input validation failed with " +
                          std::to_string(parsed.errors.size()) + " problem(s)");
  }
  return std::move(*parsed.network);
}

struct FitArgs {
  std::string input, output, estimator = "exch", blocks_file;
  int auto_blocks = 0;
  double knn_frac = 0.2;
  double alpha = 0.05;
  int quantiles = 0;
  std::uint64_t seed = 0;
  int threads = 0;
};

int run_fit(const FitArgs& args) {
  DirectedNetwork net = load_network_or_die(args.input);
  RegressionFit fit = ols_fit(net);

  Json report = Json::object();
  report.set("schema", 1);
  report.set("kind", "fit");
  report.set("estimator", args.estimator == "exch" ? "exchangeable"
                                                   : args.estimator);
  report.set("n", net.n());
  report.set("p", static_cast<int>(fit.beta_hat.size()));
  report.set("alpha", args.alpha);

  CovarianceModel model;
  Json blocks_info = Json::object();
  if (args.estimator == "dc") {
    model = estimate_dc(fit);
  } else if (args.estimator == "exch") {
    model = estimate_exchangeable(fit);
  } else if (args.estimator == "block") {
    BlockAssignment g;
    if (!args.blocks_file.empty()) {
      g = read_blocks_csv(args.blocks_file, net);
      blocks_info.set("estimated", false);
    } else if (args.auto_blocks >= 2) {
      BlockDetectOptions opts;
      opts.num_blocks = args.auto_blocks;
      opts.knn_fraction = args.knn_frac;
      if (args.quantiles > 0) opts.quantiles = args.quantiles;
      opts.seed = args.seed;
      opts.n_threads = args.threads;
      auto det = detect_blocks(fit, opts);
      g = det.assignment;
      blocks_info.set("estimated", true);
      blocks_info.set("eigenvalues", vector_json(det.laplacian_eigenvalues));
      Json warn = Json::array();
      for (const auto& w : det.warnings) warn.push_back(w);
      blocks_info.set("warnings", std::move(warn));
    } else {
      throw ValidationError(
          "block estimator needs --blocks FILE or --auto-blocks B");
    }
    blocks_info.set("assignment", assignment_json(g));
    model = estimate_block(fit, g);
  } else {
    throw ValidationError("unknown estimator: " + args.estimator);
  }

  SandwichResult sw = sandwich(fit, model, args.alpha);
  report.set("beta", vector_json(fit.beta_hat));
  report.set("se", vector_json(sw.se));
  report.set("ci_lower", vector_json(sw.ci_lower));
  report.set("ci_upper", vector_json(sw.ci_upper));
  report.set("covariance_params", params_json(model.params));
  report.set("counts", counts_json(model.counts));
  if (blocks_info.is_object() && args.estimator == "block")
    report.set("blocks", std::move(blocks_info));
  Json actors = Json::array();
  for (const auto& a : net.actor_labels()) actors.push_back(a);
  report.set("actors", std::move(actors));
  write_text(args.output, report.dump(2));
  return 0;
}

struct BlocksArgs {
  std::string input, residuals, output, csv_output;
  int num_blocks = 2;
  int b_max = 6;
  double knn_frac = 0.2;
  int quantiles = 0;
  std::uint64_t seed = 0;
  int threads = 0;
};

int run_blocks(const BlocksArgs& args) {
  RegressionFit fit;
  std::vector<std::string> labels;
  if (!args.residuals.empty()) {
    auto parsed = read_network_csv(args.residuals);
    if (!parsed.network) {
      for (const auto& e : parsed.errors) std::cerr << "error: " << e << "\n";
      throw ValidationError("residuals validation failed");
    }
    fit.residuals = parsed.network->response();
    fit.n = parsed.network->n();
    labels = parsed.network->actor_labels();
  } else {
    DirectedNetwork net = load_network_or_die(args.input);
    fit = ols_fit(net);
    labels = net.actor_labels();
  }

  auto sets = residual_product_sets(
      fit, args.quantiles > 0 ? std::optional<int>(args.quantiles)
                              : std::nullopt);
  auto similarity = similarity_matrix(sets, args.threads);
  auto weights = knn_graph(similarity, default_knn(fit.n, args.knn_frac));
  auto gap = eigengap_select(weights, std::min(args.b_max, fit.n - 1));
  auto cluster = spectral_cluster(weights, args.num_blocks, args.seed);

  Json report = Json::object();
  report.set("schema", 1);
  report.set("kind", "blocks");
  report.set("n", fit.n);
  report.set("B", args.num_blocks);
  report.set("eigenvalues", vector_json(gap.eigenvalues));
  Json ranked = Json::array();
  for (int b : gap.ranked_b) ranked.push_back(b);
  report.set("ranked_b_candidates", std::move(ranked));
  report.set("assignment", assignment_json(cluster.assignment));
  double smin = 1.0, smax = 0.0, ssum = 0.0;
  long cnt = 0;
  for (int i = 0; i < fit.n; ++i)
    for (int j = i + 1; j < fit.n; ++j) {
      smin = std::min(smin, similarity(i, j));
      smax = std::max(smax, similarity(i, j));
      ssum += similarity(i, j);
      ++cnt;
    }
  Json sim = Json::object();
  sim.set("min", smin);
  sim.set("mean", ssum / std::max(1L, cnt));
  sim.set("max", smax);
  report.set("similarity_summary", std::move(sim));
  Json warn = Json::array();
  for (const auto& w : cluster.warnings) warn.push_back(w);
  report.set("warnings", std::move(warn));

  if (!args.csv_output.empty())
    write_blocks_csv(cluster.assignment, labels, args.csv_output);
  write_text(args.output, report.dump(2));
  return 0;
}

struct SimulateArgs {
  int n = 20;
  std::string block_sizes;
  std::string family = "absdiff", setting = "independent";
  double r = 0.25, alpha1 = 0.5, nts = 0.45, scale = 0.0;
  std::string beta = "1,1";
  std::uint64_t seed = 0;
  bool censor = false;
  std::string output, truth;
};

int run_simulate(const SimulateArgs& args) {
  BlockAssignment g;
  if (!args.block_sizes.empty()) {
    auto sizes = parse_int_list(args.block_sizes);
    std::vector<int> labels;
    for (std::size_t b = 0; b < sizes.size(); ++b)
      labels.insert(labels.end(), static_cast<std::size_t>(sizes[b]),
                    static_cast<int>(b));
    g = BlockAssignment(std::move(labels), static_cast<int>(sizes.size()));
  } else {
    g = equal_blocks(args.n);
  }
  auto params = ErrorModelParams::from_r_alpha(args.r, args.alpha1);
  auto betas = parse_double_list(args.beta);
  if (betas.size() != 2) throw ValidationError("--beta expects two values");
  Eigen::VectorXd beta(2);
  beta << betas[0], betas[1];

  const auto family = parse_family(args.family);
  const auto setting = parse_setting(args.setting);
  CovariateSpec spec =
      args.scale > 0.0
          ? make_covariate_spec(family, setting, args.scale, g.num_blocks)
          : calibrate_nts(family, setting, params, beta(1), args.nts);

  SimulatedNetwork sim =
      generate_network(g, beta, spec, params, args.seed, args.censor);
  write_network_csv(sim.net, args.output);

  if (!args.truth.empty()) {
    Json truth = Json::object();
    truth.set("schema", 1);
    truth.set("kind", "truth");
    truth.set("seed", static_cast<long long>(args.seed));
    truth.set("beta", vector_json(beta));
    truth.set("r", args.r);
    truth.set("alpha1", args.alpha1);
    truth.set("family", args.family);
    truth.set("setting", args.setting);
    truth.set("censor", args.censor);
    truth.set("assignment", assignment_json(sim.g));
    truth.set("covariance_params", params_json(sim.truth.params));
    long long n_cens = 0;
    for (bool c : sim.censored) n_cens += c ? 1 : 0;
    truth.set("censored_dyads", n_cens);
    write_text(args.truth, truth.dump(2));
  }
  return 0;
}

struct CensoredArgs {
  std::string input, output, blocks_file;
  int auto_blocks = 0;
  double knn_frac = 0.2;
  double var_min = 1e-2, rho_max = 0.9, alpha = 0.05;
  int min_pairs = 30;
  std::uint64_t seed = 0;
  int threads = 0;
};

int run_censored(const CensoredArgs& args) {
  DirectedNetwork net = load_network_or_die(args.input);
  BlockAssignment g;
  Json blocks_info = Json::object();
  if (!args.blocks_file.empty()) {
    g = read_blocks_csv(args.blocks_file, net);
    blocks_info.set("estimated", false);
  } else if (args.auto_blocks >= 2) {
    // Preliminary exchangeable OLS on the positive rows drives block
    // detection; censored rows keep their zero-residual products.
    auto [design, y] = build_design_matrix(net);
    std::vector<int> pos;
    for (int i = 0; i < net.num_dyads(); ++i)
      if (y(i) != 0.0) pos.push_back(i);
    if (static_cast<int>(pos.size()) < design.cols() + 1)
      throw ValidationError("too few positive observations for block detection");
    Eigen::MatrixXd xp(pos.size(), design.cols());
    Eigen::VectorXd yp(pos.size());
    for (std::size_t t = 0; t < pos.size(); ++t) {
      xp.row(static_cast<Eigen::Index>(t)) = design.row(pos[t]);
      yp(static_cast<Eigen::Index>(t)) = y(pos[t]);
    }
    Eigen::VectorXd beta = xp.colPivHouseholderQr().solve(yp);
    RegressionFit prelim;
    prelim.beta_hat = beta;
    prelim.residuals = y - design * beta;
    prelim.n = net.n();
    BlockDetectOptions opts;
    opts.num_blocks = args.auto_blocks;
    opts.knn_fraction = args.knn_frac;
    opts.seed = args.seed;
    opts.n_threads = args.threads;
    auto det = detect_blocks(prelim, opts);
    g = det.assignment;
    blocks_info.set("estimated", true);
  } else {
    throw ValidationError(
        "censored-fit needs --blocks FILE or --auto-blocks B");
  }
  blocks_info.set("assignment", assignment_json(g));

  CensoredFitOptions opts;
  opts.var_min = args.var_min;
  opts.rho_max = args.rho_max;
  opts.min_pairs = args.min_pairs;
  opts.alpha = args.alpha;
  opts.seed = args.seed;
  opts.n_threads = args.threads;
  CensoredFitResult res = censored_fit(net, g, opts);

  Json report = Json::object();
  report.set("schema", 1);
  report.set("kind", "censored-fit");
  report.set("n", net.n());
  report.set("p", static_cast<int>(res.beta_hat.size()));
  report.set("alpha", args.alpha);
  report.set("censored_fraction", res.censored_fraction);
  report.set("beta", vector_json(res.beta_hat));
  report.set("se", vector_json(res.se));
  report.set("ci_lower", vector_json(res.ci_lower));
  report.set("ci_upper", vector_json(res.ci_upper));
  report.set("covariance_params", params_json(res.cov_params));
  report.set("blocks", std::move(blocks_info));
  Json diags = Json::array();
  for (const auto& d : res.diagnostics) {
    Json dj = Json::object();
    dj.set("key", d.key.to_string());
    dj.set("pairs", d.pairs);
    dj.set("observations", d.observations);
    dj.set("dropped", d.dropped);
    dj.set("converged", d.converged);
    dj.set("iterations", d.iterations);
    dj.set("loglik", d.loglik);
    dj.set("underflows", d.underflows);
    diags.push_back(std::move(dj));
  }
  report.set("subproblems", std::move(diags));
  Json warn = Json::array();
  for (const auto& w : res.warnings) warn.push_back(w);
  report.set("warnings", std::move(warn));
  write_text(args.output, report.dump(2));
  return 0;
}

struct PlanArgs {
  std::string n_list = "20,40,80";
  std::string family = "absdiff", setting = "independent";
  std::string estimators = "block-oracle,block-estimated,exchangeable,dc";
  int sims = 50, reps = 200;
  double alpha = 0.05, r = 0.25, alpha1 = 0.5, nts = 0.45, knn_frac = 0.2;
  int quantiles = 200;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string output, csv;
  std::string r_list = "0.25,0.5,0.75";  // block-recovery only
};

ExperimentPlan make_plan(const PlanArgs& args) {
  ExperimentPlan plan;
  plan.n_values = parse_int_list(args.n_list);
  plan.family = parse_family(args.family);
  plan.setting = parse_setting(args.setting);
  plan.estimators.clear();
  std::stringstream ss(args.estimators);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto est = parse_estimator(tok);
    if (!est) throw ValidationError("unknown estimator: " + tok);
    plan.estimators.push_back(*est);
  }
  plan.n_covariate_sims = args.sims;
  plan.n_error_reps = args.reps;
  plan.alpha = args.alpha;
  plan.seed = args.seed;
  plan.r = args.r;
  plan.alpha1 = args.alpha1;
  plan.nts_target = args.nts;
  plan.knn_fraction = args.knn_frac;
  plan.quantiles = args.quantiles;
  plan.n_threads = args.threads;
  return plan;
}

void add_plan_options(CLI::App* cmd, PlanArgs& args, bool with_estimators) {
  cmd->add_option("--n-list", args.n_list, "comma-separated network sizes");
  cmd->add_option("--family", args.family, "match|absdiff|pairnormal");
  cmd->add_option("--setting", args.setting,
                  "independent|high-high|high-low");
  if (with_estimators)
    cmd->add_option("--estimators", args.estimators,
                    "comma list: dc,exchangeable,block-oracle,block-estimated,"
                    "oracle-true");
  cmd->add_option("--sims", args.sims, "covariate simulations");
  cmd->add_option("--reps", args.reps, "error replicates (or seeds)");
  cmd->add_option("--alpha", args.alpha, "CI level alpha");
  cmd->add_option("--r", args.r, "block strength in (0,1]");
  cmd->add_option("--alpha1", args.alpha1, "error scale");
  cmd->add_option("--nts", args.nts, "noise-to-signal target");
  cmd->add_option("--knn-frac", args.knn_frac, "KNN fraction of n");
  cmd->add_option("--quantiles", args.quantiles,
                  "residual-product compression (0 = exact)");
  cmd->add_option("--seed", args.seed, "master seed")->required();
  cmd->add_option("--threads", args.threads, "worker threads (0 = cores)")
      ->envname("NETREG_THREADS");
  cmd->add_option("--output", args.output, "JSON report path (- for stdout)");
  cmd->add_option("--csv", args.csv, "flat CSV path");
}

int finish_threads(int threads) {
  return threads <= 0 ? default_threads() : threads;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network regression with exchangeable and block-exchangeable "
               "standard errors"};
  app.set_config("--config", "",
                 "key=value config file with [subcommand] sections; explicit\n"
                 "flags win over config values");
  app.fallthrough();
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "OLS fit with sandwich SEs");
  fit_cmd->add_option("--input", fit_args.input, "network CSV")->required();
  fit_cmd->add_option("--output", fit_args.output, "JSON report path");
  fit_cmd->add_option("--estimator", fit_args.estimator, "dc|exch|block");
  auto* opt_blocks =
      fit_cmd->add_option("--blocks", fit_args.blocks_file, "actor,block CSV");
  auto* opt_auto = fit_cmd->add_option("--auto-blocks", fit_args.auto_blocks,
                                       "estimate B blocks from residuals");
  opt_blocks->excludes(opt_auto);
  fit_cmd->add_option("--knn-frac", fit_args.knn_frac, "KNN fraction");
  fit_cmd->add_option("--alpha", fit_args.alpha, "CI level alpha");
  fit_cmd->add_option("--quantiles", fit_args.quantiles,
                      "residual-product compression (0 = exact)");
  fit_cmd->add_option("--seed", fit_args.seed, "seed for block estimation");
  fit_cmd->add_option("--threads", fit_args.threads, "worker threads")
      ->envname("NETREG_THREADS");

  BlocksArgs blocks_args;
  auto* blocks_cmd =
      app.add_subcommand("blocks", "estimate latent blocks from residuals");
  auto* bin = blocks_cmd->add_option("--input", blocks_args.input, "network CSV");
  auto* bres = blocks_cmd->add_option("--residuals", blocks_args.residuals,
                                      "src,dst,y CSV of residuals");
  bin->excludes(bres);
  blocks_cmd->add_option("--B", blocks_args.num_blocks, "block count");
  blocks_cmd->add_option("--b-max", blocks_args.b_max,
                         "largest candidate B for the eigengap report");
  blocks_cmd->add_option("--knn-frac", blocks_args.knn_frac, "KNN fraction");
  blocks_cmd->add_option("--quantiles", blocks_args.quantiles,
                         "residual-product compression (0 = exact)");
  blocks_cmd->add_option("--seed", blocks_args.seed, "k-means seed");
  blocks_cmd->add_option("--threads", blocks_args.threads, "worker threads")
      ->envname("NETREG_THREADS");
  blocks_cmd->add_option("--output", blocks_args.output, "JSON report path");
  blocks_cmd->add_option("--output-csv", blocks_args.csv_output,
                         "actor,block CSV path");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic network");
  sim_cmd->add_option("--n", sim_args.n, "actor count");
  sim_cmd->add_option("--block-sizes", sim_args.block_sizes,
                      "comma list overriding equal halves");
  sim_cmd->add_option("--family", sim_args.family, "match|absdiff|pairnormal");
  sim_cmd->add_option("--setting", sim_args.setting,
                      "independent|high-high|high-low");
  sim_cmd->add_option("--r", sim_args.r, "block strength in (0,1]");
  sim_cmd->add_option("--alpha1", sim_args.alpha1, "error scale");
  sim_cmd->add_option("--nts", sim_args.nts, "noise-to-signal target");
  sim_cmd->add_option("--scale", sim_args.scale,
                      "covariate dispersion (skips NTS calibration)");
  sim_cmd->add_option("--beta", sim_args.beta, "beta0,beta1");
  sim_cmd->add_option("--seed", sim_args.seed, "seed")->required();
  sim_cmd->add_flag("--censor", sim_args.censor, "left-censor responses at 0");
  sim_cmd->add_option("--output", sim_args.output, "network CSV path")
      ->required();
  sim_cmd->add_option("--truth", sim_args.truth, "truth JSON path");

  CensoredArgs cens_args;
  auto* cens_cmd =
      app.add_subcommand("censored-fit", "pairwise pseudo-likelihood fit");
  cens_cmd->add_option("--input", cens_args.input, "network CSV (0 = censored)")
      ->required();
  cens_cmd->add_option("--output", cens_args.output, "JSON report path");
  auto* copt_blocks = cens_cmd->add_option("--blocks", cens_args.blocks_file,
                                           "actor,block CSV");
  auto* copt_auto = cens_cmd->add_option("--auto-blocks", cens_args.auto_blocks,
                                         "estimate B blocks first");
  copt_blocks->excludes(copt_auto);
  cens_cmd->add_option("--knn-frac", cens_args.knn_frac, "KNN fraction");
  cens_cmd->add_option("--var-min", cens_args.var_min, "variance lower bound");
  cens_cmd->add_option("--rho-max", cens_args.rho_max, "correlation bound");
  cens_cmd->add_option("--min-pairs", cens_args.min_pairs,
                       "minimum pairs per subproblem");
  cens_cmd->add_option("--alpha", cens_args.alpha, "CI level alpha");
  cens_cmd->add_option("--seed", cens_args.seed, "pairing seed");
  cens_cmd->add_option("--threads", cens_args.threads, "worker threads")
      ->envname("NETREG_THREADS");

  PlanArgs cov_args;
  auto* cov_cmd = app.add_subcommand("coverage", "CI coverage experiment");
  add_plan_options(cov_cmd, cov_args, true);

  PlanArgs gap_args;
  auto* gap_cmd = app.add_subcommand(
      "theorem-gap", "scaled block-vs-exchangeable sandwich gap");
  add_plan_options(gap_cmd, gap_args, false);

  PlanArgs rec_args;
  auto* rec_cmd =
      app.add_subcommand("block-recovery", "misclustering across r and n");
  add_plan_options(rec_cmd, rec_args, false);
  rec_cmd->add_option("--r-list", rec_args.r_list, "comma list of r values");

  PlanArgs sev_args;
  auto* sev_cmd = app.add_subcommand("se-variance",
                                     "variability of estimated SEs");
  add_plan_options(sev_cmd, sev_args, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are input validation
  }

  try {
    if (fit_cmd->parsed()) {
      fit_args.threads = finish_threads(fit_args.threads);
      return run_fit(fit_args);
    }
    if (blocks_cmd->parsed()) {
      blocks_args.threads = finish_threads(blocks_args.threads);
      return run_blocks(blocks_args);
    }
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (cens_cmd->parsed()) {
      cens_args.threads = finish_threads(cens_args.threads);
      return run_censored(cens_args);
    }
    auto run_plan = [&](PlanArgs& args, const std::string& kind) {
      args.threads = finish_threads(args.threads);
      ExperimentPlan plan = make_plan(args);
      if (kind == "coverage") {
        auto report = run_coverage(plan);
        write_text(args.output, to_json(report).dump(2));
        if (!args.csv.empty()) write_text(args.csv, coverage_csv(report));
      } else if (kind == "theorem-gap") {
        auto report = run_theorem_check(plan);
        write_text(args.output, to_json(report).dump(2));
        if (!args.csv.empty()) write_text(args.csv, theorem_gap_csv(report));
      } else if (kind == "block-recovery") {
        auto report =
            run_block_recovery(plan, parse_double_list(args.r_list), args.reps);
        write_text(args.output, to_json(report).dump(2));
        if (!args.csv.empty()) write_text(args.csv, block_recovery_csv(report));
      } else {
        auto report = run_estimator_variance(plan);
        write_text(args.output, to_json(report).dump(2));
        if (!args.csv.empty()) write_text(args.csv, se_variance_csv(report));
      }
      return 0;
    };
    if (cov_cmd->parsed()) return run_plan(cov_args, "coverage");
    if (gap_cmd->parsed()) return run_plan(gap_args, "theorem-gap");
    if (rec_cmd->parsed()) return run_plan(rec_args, "block-recovery");
    if (sev_cmd->parsed()) return run_plan(sev_args, "se-variance");
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
