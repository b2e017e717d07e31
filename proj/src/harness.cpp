#include "netreg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "netreg/blockdetect.hpp"
#include "netreg/covariance.hpp"
#include "netreg/errors.hpp"
#include "netreg/normal.hpp"
#include "netreg/ols.hpp"
#include "netreg/parallel.hpp"

namespace netreg {

const char* estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::DC: return "dc";
    case EstimatorKind::Exchangeable: return "exchangeable";
    case EstimatorKind::BlockOracle: return "block-oracle";
    case EstimatorKind::BlockEstimated: return "block-estimated";
    case EstimatorKind::OracleTrue: return "oracle-true";
  }
  return "?";
}

std::optional<EstimatorKind> parse_estimator(const std::string& name) {
  if (name == "dc") return EstimatorKind::DC;
  if (name == "exchangeable" || name == "exch") return EstimatorKind::Exchangeable;
  if (name == "block-oracle") return EstimatorKind::BlockOracle;
  if (name == "block-estimated") return EstimatorKind::BlockEstimated;
  if (name == "oracle-true") return EstimatorKind::OracleTrue;
  return std::nullopt;
}

void ExperimentPlan::validate() const {
  if (n_values.empty()) throw ValidationError("plan needs at least one n");
  for (int n : n_values)
    if (n < 6) throw ValidationError("plan n values must be at least 6");
  if (estimators.empty()) throw ValidationError("plan needs estimators");
  if (n_covariate_sims < 1 || n_error_reps < 1)
    throw ValidationError("replicate counts must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("alpha must be in (0,1)");
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * (static_cast<double>(values.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - std::floor(pos);
  return values[lo] + frac * (values[hi] - values[lo]);
}

PercentileSummary summarize(const std::vector<double>& values) {
  PercentileSummary s;
  s.median = percentile(values, 0.5);
  s.p10 = percentile(values, 0.10);
  s.p90 = percentile(values, 0.90);
  s.p025 = percentile(values, 0.025);
  s.p975 = percentile(values, 0.975);
  return s;
}

namespace {

constexpr std::uint64_t kTagBlocks = 0x67626c6bULL;
constexpr std::uint64_t kTagCovariates = 0x636f7661ULL;
constexpr std::uint64_t kTagErrors = 0x65727230ULL;
constexpr std::uint64_t kTagKmeans = 0x6b6d3332ULL;

struct SimContext {
  BlockAssignment g;
  Eigen::MatrixXd design;       // [1, x]
  Eigen::MatrixXd pinv;         // (X^T X)^{-1} X^T
  Eigen::MatrixXd xtx_inv;
  Eigen::VectorXd x;
  SandwichParts parts_oracle;
  SandwichParts parts_exch;
  Eigen::MatrixXd vcov_true;    // oracle-truth sandwich, fixed given X
};

SimContext make_sim_context(const ExperimentPlan& plan, int n, int sim,
                            const CovariateSpec& spec,
                            const ErrorModelParams& params) {
  RngStream g_rng(plan.seed, RngStream::derive({kTagBlocks,
                                                static_cast<std::uint64_t>(n),
                                                static_cast<std::uint64_t>(sim)}));
  RngStream x_rng(plan.seed, RngStream::derive({kTagCovariates,
                                                static_cast<std::uint64_t>(n),
                                                static_cast<std::uint64_t>(sim)}));
  BlockAssignment g = shuffled_equal_blocks(n, g_rng);
  Eigen::VectorXd x = sample_covariates(spec, g, x_rng);
  const int nd = n * (n - 1);
  Eigen::MatrixXd design(nd, 2);
  design.col(0).setOnes();
  design.col(1) = x;
  Eigen::Matrix2d xtx = design.transpose() * design;
  Eigen::Matrix2d xtx_inv = xtx.inverse();
  Eigen::MatrixXd pinv = xtx_inv * design.transpose();
  SandwichParts parts_oracle(design, g);
  SandwichParts parts_exch(design, BlockAssignment::trivial(n));
  CovarianceModel truth = true_covariance(params, g);
  Eigen::MatrixXd vcov_true =
      xtx_inv * parts_oracle.xt_omega_x(truth.params) * xtx_inv;
  return SimContext{std::move(g), std::move(design), std::move(pinv),
                    Eigen::MatrixXd(xtx_inv), std::move(x),
                    std::move(parts_oracle), std::move(parts_exch),
                    std::move(vcov_true)};
}

RegressionFit quick_fit(const SimContext& ctx, const Eigen::VectorXd& y, int n) {
  RegressionFit fit;
  fit.beta_hat = ctx.pinv * y;
  fit.residuals = y - ctx.design * fit.beta_hat;
  fit.xtx_inv = ctx.xtx_inv;
  fit.design = ctx.design;
  fit.n = n;
  return fit;
}

}  // namespace

CoverageReport run_coverage(const ExperimentPlan& plan) {
  plan.validate();
  const ErrorModelParams params =
      ErrorModelParams::from_r_alpha(plan.r, plan.alpha1);
  const CovariateSpec spec = calibrate_nts(plan.family, plan.setting, params,
                                           plan.beta1, plan.nts_target);
  const double z = z_critical(plan.alpha);

  CoverageReport report;
  report.plan = plan;
  const auto n_est = plan.estimators.size();

  for (int n : plan.n_values) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<double>> sim_coverage(
        n_est, std::vector<double>(static_cast<std::size_t>(plan.n_covariate_sims), 0.0));
    std::vector<std::vector<double>> sim_width = sim_coverage;
    std::vector<std::vector<long long>> sim_errors(
        n_est,
        std::vector<long long>(static_cast<std::size_t>(plan.n_covariate_sims), 0));

    parallel_for(static_cast<std::size_t>(plan.n_covariate_sims),
                 plan.n_threads, [&](std::size_t sim) {
      const SimContext ctx =
          make_sim_context(plan, n, static_cast<int>(sim), spec, params);
      std::vector<long long> covered(n_est, 0), valid(n_est, 0);
      std::vector<double> width(n_est, 0.0);
      std::vector<long long> errs(n_est, 0);
      for (int rep = 0; rep < plan.n_error_reps; ++rep) {
        RngStream e_rng(plan.seed,
                        RngStream::derive({kTagErrors,
                                           static_cast<std::uint64_t>(n),
                                           static_cast<std::uint64_t>(sim),
                                           static_cast<std::uint64_t>(rep)}));
        const Eigen::VectorXd xi = sample_errors(params, ctx.g, e_rng);
        const Eigen::VectorXd y =
            plan.beta0 + (plan.beta1 * ctx.x.array() + xi.array());
        const RegressionFit fit = quick_fit(ctx, y, n);
        for (std::size_t e = 0; e < n_est; ++e) {
          double v11 = std::numeric_limits<double>::quiet_NaN();
          try {
            switch (plan.estimators[e]) {
              case EstimatorKind::DC: {
                const Eigen::MatrixXd xox =
                    xt_omega_x_dc(ctx.design, fit.residuals, n);
                v11 = (ctx.xtx_inv * xox * ctx.xtx_inv)(1, 1);
                break;
              }
              case EstimatorKind::Exchangeable: {
                const CovarianceModel m = estimate_exchangeable(fit);
                v11 = (ctx.xtx_inv * ctx.parts_exch.xt_omega_x(m.params) *
                       ctx.xtx_inv)(1, 1);
                break;
              }
              case EstimatorKind::BlockOracle: {
                const CovarianceModel m = estimate_block(fit, ctx.g);
                v11 = (ctx.xtx_inv * ctx.parts_oracle.xt_omega_x(m.params) *
                       ctx.xtx_inv)(1, 1);
                break;
              }
              case EstimatorKind::BlockEstimated: {
                BlockDetectOptions opts;
                opts.num_blocks = 2;
                opts.knn_fraction = plan.knn_fraction;
                if (plan.quantiles > 0) opts.quantiles = plan.quantiles;
                opts.seed = RngStream::derive(
                    {kTagKmeans, plan.seed, static_cast<std::uint64_t>(n),
                     static_cast<std::uint64_t>(sim),
                     static_cast<std::uint64_t>(rep)});
                const auto det = detect_blocks(fit, opts);
                const CovarianceModel m = estimate_block(fit, det.assignment);
                SandwichParts parts_hat(ctx.design, det.assignment);
                v11 = (ctx.xtx_inv * parts_hat.xt_omega_x(m.params) *
                       ctx.xtx_inv)(1, 1);
                break;
              }
              case EstimatorKind::OracleTrue:
                v11 = ctx.vcov_true(1, 1);
                break;
            }
            if (!(v11 >= 0.0))
              throw NumericalError("sandwich produced negative variance");
          } catch (const std::exception&) {
            ++errs[e];
            continue;
          }
          const double half = z * std::sqrt(v11);
          ++valid[e];
          width[e] += 2.0 * half;
          if (std::fabs(fit.beta_hat(1) - plan.beta1) <= half) ++covered[e];
        }
      }
      for (std::size_t e = 0; e < n_est; ++e) {
        sim_coverage[e][sim] =
            valid[e] > 0 ? static_cast<double>(covered[e]) / valid[e] : 0.0;
        sim_width[e][sim] = valid[e] > 0 ? width[e] / valid[e] : 0.0;
        sim_errors[e][sim] = errs[e];
      }
    });

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    for (std::size_t e = 0; e < n_est; ++e) {
      CoverageCell cell;
      cell.n = n;
      cell.estimator = plan.estimators[e];
      cell.per_sim_coverage = sim_coverage[e];
      cell.coverage = summarize(sim_coverage[e]);
      double w = 0.0;
      for (double v : sim_width[e]) w += v;
      cell.mean_ci_width = w / static_cast<double>(sim_width[e].size());
      for (long long c : sim_errors[e]) cell.estimator_errors += c;
      cell.runtime_seconds = elapsed;
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

TheoremGapReport run_theorem_check(const ExperimentPlan& plan) {
  plan.validate();
  const ErrorModelParams params =
      ErrorModelParams::from_r_alpha(plan.r, plan.alpha1);
  const CovariateSpec spec = calibrate_nts(plan.family, plan.setting, params,
                                           plan.beta1, plan.nts_target);
  TheoremGapReport report;
  report.plan = plan;
  report.n_values = plan.n_values;
  report.gap_beta1.resize(plan.n_values.size());

  for (std::size_t ni = 0; ni < plan.n_values.size(); ++ni) {
    const int n = plan.n_values[ni];
    auto& gaps = report.gap_beta1[ni];
    gaps.assign(static_cast<std::size_t>(plan.n_covariate_sims), 0.0);
    std::vector<std::string> sim_error(
        static_cast<std::size_t>(plan.n_covariate_sims));
    // One gap per covariate seed, averaged over error replicates so the
    // X-driven limit is not buried in single-draw estimator noise.
    parallel_for(static_cast<std::size_t>(plan.n_covariate_sims),
                 plan.n_threads, [&](std::size_t simi) {
      try {
      const int sim = static_cast<int>(simi);
      const SimContext ctx = make_sim_context(plan, n, sim, spec, params);
      double total = 0.0;
      for (int rep = 0; rep < plan.n_error_reps; ++rep) {
        RngStream e_rng(plan.seed,
                        RngStream::derive({kTagErrors,
                                           static_cast<std::uint64_t>(n),
                                           static_cast<std::uint64_t>(sim),
                                           static_cast<std::uint64_t>(rep),
                                           0xabULL}));
        const Eigen::VectorXd xi = sample_errors(params, ctx.g, e_rng);
        const Eigen::VectorXd y =
            plan.beta0 + (plan.beta1 * ctx.x.array() + xi.array());
        const RegressionFit fit = quick_fit(ctx, y, n);
        const CovarianceModel mb = estimate_block(fit, ctx.g);
        const CovarianceModel me = estimate_exchangeable(fit);
        const Eigen::MatrixXd vb =
            ctx.xtx_inv * ctx.parts_oracle.xt_omega_x(mb.params) * ctx.xtx_inv;
        const Eigen::MatrixXd ve =
            ctx.xtx_inv * ctx.parts_exch.xt_omega_x(me.params) * ctx.xtx_inv;
        total += n * (vb(1, 1) - ve(1, 1));
      }
      gaps[simi] = total / plan.n_error_reps;
      } catch (const std::exception& e) {
        sim_error[simi] = e.what();
      }
    });
    for (const auto& err : sim_error)
      if (!err.empty()) throw NumericalError(err);
    report.median_gap.push_back(percentile(gaps, 0.5));
  }
  return report;
}

BlockRecoveryReport run_block_recovery(const ExperimentPlan& plan,
                                       const std::vector<double>& r_values,
                                       int reps) {
  plan.validate();
  if (r_values.empty()) throw ValidationError("need at least one r value");
  BlockRecoveryReport report;
  report.plan = plan;
  report.r_values = r_values;
  report.n_values = plan.n_values;
  report.reps = reps;

  // Recovery runs keep the covariate neutral: iid standard normal dyads.
  CovariateSpec spec;
  spec.family = CovariateFamily::PairwiseNormal;
  spec.setting = CovariateSetting::Independent;
  spec.pair_sd = Eigen::MatrixXd::Constant(2, 2, 1.0);

  for (double r : r_values) {
    const ErrorModelParams params = ErrorModelParams::from_r_alpha(r, plan.alpha1);
    for (int n : plan.n_values) {
      BlockRecoveryCell cell;
      cell.r = r;
      cell.n = n;
      cell.samples.assign(static_cast<std::size_t>(reps), 0.0);
      std::vector<std::string> rep_error(static_cast<std::size_t>(reps));
      parallel_for(static_cast<std::size_t>(reps), plan.n_threads,
                   [&](std::size_t repi) {
        try {
        const int rep = static_cast<int>(repi);
        const std::uint64_t rbits = static_cast<std::uint64_t>(r * 1e6);
        RngStream g_rng(plan.seed, RngStream::derive({kTagBlocks, rbits,
                                                      static_cast<std::uint64_t>(n),
                                                      static_cast<std::uint64_t>(rep)}));
        RngStream x_rng(plan.seed, RngStream::derive({kTagCovariates, rbits,
                                                      static_cast<std::uint64_t>(n),
                                                      static_cast<std::uint64_t>(rep)}));
        RngStream e_rng(plan.seed, RngStream::derive({kTagErrors, rbits,
                                                      static_cast<std::uint64_t>(n),
                                                      static_cast<std::uint64_t>(rep)}));
        const BlockAssignment g = shuffled_equal_blocks(n, g_rng);
        const Eigen::VectorXd x = sample_covariates(spec, g, x_rng);
        const Eigen::VectorXd xi = sample_errors(params, g, e_rng);
        const Eigen::VectorXd y =
            plan.beta0 + (plan.beta1 * x.array() + xi.array());
        const int nd = n * (n - 1);
        Eigen::MatrixXd design(nd, 2);
        design.col(0).setOnes();
        design.col(1) = x;
        const RegressionFit fit = ols_fit(design, y, n);
        BlockDetectOptions opts;
        opts.num_blocks = 2;
        opts.knn_fraction = plan.knn_fraction;
        if (plan.quantiles > 0) opts.quantiles = plan.quantiles;
        opts.seed = RngStream::derive({kTagKmeans, plan.seed, rbits,
                                       static_cast<std::uint64_t>(n),
                                       static_cast<std::uint64_t>(rep)});
        const auto det = detect_blocks(fit, opts);
        cell.samples[repi] = misclustering(g, det.assignment);
        } catch (const std::exception& e) {
          rep_error[repi] = e.what();
        }
      });
      for (const auto& err : rep_error)
        if (!err.empty()) throw NumericalError(err);
      cell.misclustering = summarize(cell.samples);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

SeVarianceReport run_estimator_variance(const ExperimentPlan& plan) {
  plan.validate();
  const ErrorModelParams params =
      ErrorModelParams::from_r_alpha(plan.r, plan.alpha1);
  const CovariateSpec spec = calibrate_nts(plan.family, plan.setting, params,
                                           plan.beta1, plan.nts_target);
  const int n = plan.n_values.front();
  const auto n_est = plan.estimators.size();
  SeVarianceReport report;
  report.plan = plan;
  report.n = n;
  report.reps = plan.n_error_reps;
  report.estimators = plan.estimators;
  report.sd_per_sim.assign(n_est, {});
  report.mean_se.assign(n_est, 0.0);
  report.errors.assign(n_est, 0);

  std::vector<std::vector<double>> sim_sd(
      n_est,
      std::vector<double>(static_cast<std::size_t>(plan.n_covariate_sims), 0.0));
  std::vector<std::vector<double>> sim_mean = sim_sd;
  std::vector<std::vector<long long>> sim_err(
      n_est,
      std::vector<long long>(static_cast<std::size_t>(plan.n_covariate_sims), 0));

  parallel_for(static_cast<std::size_t>(plan.n_covariate_sims), plan.n_threads,
               [&](std::size_t sim) {
    const SimContext ctx =
        make_sim_context(plan, n, static_cast<int>(sim), spec, params);
    std::vector<std::vector<double>> ses(n_est);
    std::vector<long long> errs(n_est, 0);
    for (int rep = 0; rep < plan.n_error_reps; ++rep) {
      RngStream e_rng(plan.seed,
                      RngStream::derive({kTagErrors,
                                         static_cast<std::uint64_t>(n), 0xfeULL,
                                         static_cast<std::uint64_t>(sim),
                                         static_cast<std::uint64_t>(rep)}));
      const Eigen::VectorXd xi = sample_errors(params, ctx.g, e_rng);
      const Eigen::VectorXd y =
          plan.beta0 + (plan.beta1 * ctx.x.array() + xi.array());
      const RegressionFit fit = quick_fit(ctx, y, n);
      for (std::size_t e = 0; e < n_est; ++e) {
        try {
          double v11;
          switch (plan.estimators[e]) {
            case EstimatorKind::DC:
              v11 = (ctx.xtx_inv * xt_omega_x_dc(ctx.design, fit.residuals, n) *
                     ctx.xtx_inv)(1, 1);
              break;
            case EstimatorKind::Exchangeable:
              v11 = (ctx.xtx_inv *
                     ctx.parts_exch.xt_omega_x(
                         estimate_exchangeable(fit).params) *
                     ctx.xtx_inv)(1, 1);
              break;
            case EstimatorKind::BlockOracle:
              v11 = (ctx.xtx_inv *
                     ctx.parts_oracle.xt_omega_x(
                         estimate_block(fit, ctx.g).params) *
                     ctx.xtx_inv)(1, 1);
              break;
            default:
              throw ValidationError(
                  "se-variance supports dc/exchangeable/block-oracle");
          }
          if (!(v11 >= 0.0)) throw NumericalError("negative variance");
          ses[e].push_back(std::sqrt(v11));
        } catch (const std::exception&) {
          ++errs[e];
        }
      }
    }
    for (std::size_t e = 0; e < n_est; ++e) {
      double mean = 0.0;
      for (double v : ses[e]) mean += v;
      mean /= std::max<std::size_t>(1, ses[e].size());
      double ss = 0.0;
      for (double v : ses[e]) ss += (v - mean) * (v - mean);
      sim_sd[e][sim] =
          ses[e].size() > 1
              ? std::sqrt(ss / (static_cast<double>(ses[e].size()) - 1.0))
              : 0.0;
      sim_mean[e][sim] = mean;
      sim_err[e][sim] = errs[e];
    }
  });

  for (std::size_t e = 0; e < n_est; ++e) {
    report.sd_per_sim[e] = sim_sd[e];
    report.sd_of_se.push_back(percentile(sim_sd[e], 0.5));
    double mean = 0.0;
    for (double v : sim_mean[e]) mean += v;
    report.mean_se[e] = mean / static_cast<double>(sim_mean[e].size());
    for (long long c : sim_err[e]) report.errors[e] += c;
  }
  return report;
}

namespace {

Json plan_json(const ExperimentPlan& plan) {
  Json j = Json::object();
  Json ns = Json::array();
  for (int n : plan.n_values) ns.push_back(n);
  j.set("n_values", std::move(ns));
  const char* fam = plan.family == CovariateFamily::BinaryMatch ? "match"
                    : plan.family == CovariateFamily::AbsDiff   ? "absdiff"
                                                                : "pairnormal";
  const char* set = plan.setting == CovariateSetting::Independent ? "independent"
                    : plan.setting == CovariateSetting::HighHigh  ? "high-high"
                                                                  : "high-low";
  j.set("family", fam);
  j.set("setting", set);
  Json est = Json::array();
  for (auto e : plan.estimators) est.push_back(estimator_name(e));
  j.set("estimators", std::move(est));
  j.set("covariate_sims", plan.n_covariate_sims);
  j.set("error_reps", plan.n_error_reps);
  j.set("alpha", plan.alpha);
  j.set("seed", static_cast<long long>(plan.seed));
  j.set("r", plan.r);
  j.set("alpha1", plan.alpha1);
  j.set("nts_target", plan.nts_target);
  j.set("beta", [&] {
    Json b = Json::array();
    b.push_back(plan.beta0);
    b.push_back(plan.beta1);
    return b;
  }());
  j.set("knn_fraction", plan.knn_fraction);
  j.set("quantiles", plan.quantiles);
  return j;
}

Json summary_json(const PercentileSummary& s) {
  Json j = Json::object();
  j.set("median", s.median);
  j.set("p10", s.p10);
  j.set("p90", s.p90);
  j.set("p2.5", s.p025);
  j.set("p97.5", s.p975);
  return j;
}

}  // namespace

Json to_json(const CoverageReport& report) {
  Json j = Json::object();
  j.set("schema", 1);
  j.set("kind", "coverage");
  j.set("plan", plan_json(report.plan));
  Json cells = Json::array();
  for (const auto& c : report.cells) {
    Json cj = Json::object();
    cj.set("n", c.n);
    cj.set("estimator", estimator_name(c.estimator));
    cj.set("coverage", summary_json(c.coverage));
    Json per = Json::array();
    for (double v : c.per_sim_coverage) per.push_back(v);
    cj.set("per_sim_coverage", std::move(per));
    cj.set("mean_ci_width", c.mean_ci_width);
    cj.set("estimator_errors", c.estimator_errors);
    // Wall-clock stays out of the report so reruns are byte-identical.
    cells.push_back(std::move(cj));
  }
  j.set("cells", std::move(cells));
  return j;
}

Json to_json(const TheoremGapReport& report) {
  Json j = Json::object();
  j.set("schema", 1);
  j.set("kind", "theorem-gap");
  j.set("plan", plan_json(report.plan));
  Json rows = Json::array();
  for (std::size_t i = 0; i < report.n_values.size(); ++i) {
    Json rj = Json::object();
    rj.set("n", report.n_values[i]);
    rj.set("median_gap", report.median_gap[i]);
    Json g = Json::array();
    for (double v : report.gap_beta1[i]) g.push_back(v);
    rj.set("gaps", std::move(g));
    rows.push_back(std::move(rj));
  }
  j.set("rows", std::move(rows));
  return j;
}

Json to_json(const BlockRecoveryReport& report) {
  Json j = Json::object();
  j.set("schema", 1);
  j.set("kind", "block-recovery");
  j.set("plan", plan_json(report.plan));
  j.set("reps", report.reps);
  Json cells = Json::array();
  for (const auto& c : report.cells) {
    Json cj = Json::object();
    cj.set("r", c.r);
    cj.set("n", c.n);
    cj.set("misclustering", summary_json(c.misclustering));
    Json samples = Json::array();
    for (double v : c.samples) samples.push_back(v);
    cj.set("samples", std::move(samples));
    cells.push_back(std::move(cj));
  }
  j.set("cells", std::move(cells));
  return j;
}

Json to_json(const SeVarianceReport& report) {
  Json j = Json::object();
  j.set("schema", 1);
  j.set("kind", "se-variance");
  j.set("plan", plan_json(report.plan));
  j.set("n", report.n);
  j.set("reps", report.reps);
  Json rows = Json::array();
  for (std::size_t e = 0; e < report.estimators.size(); ++e) {
    Json rj = Json::object();
    rj.set("estimator", estimator_name(report.estimators[e]));
    rj.set("median_sd_of_se", report.sd_of_se[e]);
    rj.set("mean_se", report.mean_se[e]);
    rj.set("errors", report.errors[e]);
    Json per = Json::array();
    for (double v : report.sd_per_sim[e]) per.push_back(v);
    rj.set("sd_per_sim", std::move(per));
    rows.push_back(std::move(rj));
  }
  j.set("rows", std::move(rows));
  return j;
}

std::string coverage_csv(const CoverageReport& report) {
  std::string out = "n,estimator,sim,coverage\n";
  for (const auto& c : report.cells) {
    for (std::size_t s = 0; s < c.per_sim_coverage.size(); ++s) {
      out += std::to_string(c.n);
      out += ',';
      out += estimator_name(c.estimator);
      out += ',';
      out += std::to_string(s);
      out += ',';
      out += format_double_17(c.per_sim_coverage[s]);
      out += '\n';
    }
  }
  return out;
}

std::string theorem_gap_csv(const TheoremGapReport& report) {
  std::string out = "n,seed,gap_beta1\n";
  for (std::size_t i = 0; i < report.n_values.size(); ++i) {
    for (std::size_t s = 0; s < report.gap_beta1[i].size(); ++s) {
      out += std::to_string(report.n_values[i]);
      out += ',';
      out += std::to_string(s);
      out += ',';
      out += format_double_17(report.gap_beta1[i][s]);
      out += '\n';
    }
  }
  return out;
}

std::string block_recovery_csv(const BlockRecoveryReport& report) {
  std::string out = "r,n,rep,misclustering\n";
  for (const auto& c : report.cells) {
    for (std::size_t s = 0; s < c.samples.size(); ++s) {
      out += format_double_17(c.r);
      out += ',';
      out += std::to_string(c.n);
      out += ',';
      out += std::to_string(s);
      out += ',';
      out += format_double_17(c.samples[s]);
      out += '\n';
    }
  }
  return out;
}

std::string se_variance_csv(const SeVarianceReport& report) {
  std::string out = "estimator,median_sd_of_se,mean_se,errors\n";
  for (std::size_t e = 0; e < report.estimators.size(); ++e) {
    out += estimator_name(report.estimators[e]);
    out += ',';
    out += format_double_17(report.sd_of_se[e]);
    out += ',';
    out += format_double_17(report.mean_se[e]);
    out += ',';
    out += std::to_string(report.errors[e]);
    out += '\n';
  }
  return out;
}

}  // namespace netreg
