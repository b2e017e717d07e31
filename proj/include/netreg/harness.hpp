#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "netreg/json_writer.hpp"
#include "netreg/simgen.hpp"

namespace netreg {

enum class EstimatorKind { DC, Exchangeable, BlockOracle, BlockEstimated, OracleTrue };

const char* estimator_name(EstimatorKind k);
std::optional<EstimatorKind> parse_estimator(const std::string& name);

// Shared experiment configuration. Desk-scale defaults: 50 covariate sims,
// 200 error replicates, block strength r = 1/4 at alpha1 = 1/2, NTS 0.45.
struct ExperimentPlan {
  std::vector<int> n_values{20, 40, 80};
  CovariateFamily family = CovariateFamily::AbsDiff;
  CovariateSetting setting = CovariateSetting::Independent;
  std::vector<EstimatorKind> estimators{
      EstimatorKind::DC, EstimatorKind::Exchangeable,
      EstimatorKind::BlockOracle, EstimatorKind::BlockEstimated};
  int n_covariate_sims = 50;
  int n_error_reps = 200;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  double r = 0.25;
  double alpha1 = 0.5;
  double nts_target = 0.45;
  double beta0 = 1.0;
  double beta1 = 1.0;
  double knn_fraction = 0.2;
  int quantiles = 200;  // compression for the estimated-blocks pipeline
  int n_threads = 1;

  void validate() const;
};

struct PercentileSummary {
  double median = 0.0, p10 = 0.0, p90 = 0.0, p025 = 0.0, p975 = 0.0;
};

// Linear-interpolation percentiles matching the boxplot whisker convention
// (2.5 / 10 / 50 / 90 / 97.5).
double percentile(std::vector<double> values, double q);
PercentileSummary summarize(const std::vector<double>& values);

struct CoverageCell {
  int n = 0;
  EstimatorKind estimator = EstimatorKind::Exchangeable;
  PercentileSummary coverage;
  std::vector<double> per_sim_coverage;
  double mean_ci_width = 0.0;
  long long estimator_errors = 0;
  double runtime_seconds = 0.0;
};

struct CoverageReport {
  ExperimentPlan plan;
  std::vector<CoverageCell> cells;
};

// Confidence-interval coverage for beta1 across covariate sims x error reps.
CoverageReport run_coverage(const ExperimentPlan& plan);

struct TheoremGapReport {
  ExperimentPlan plan;
  std::vector<int> n_values;
  std::vector<std::vector<double>> gap_beta1;  // [n][seed], n*(V_B - V_E)_11
  std::vector<double> median_gap;
};

// Scaled block-vs-exchangeable sandwich gap trajectories.
TheoremGapReport run_theorem_check(const ExperimentPlan& plan);

struct BlockRecoveryCell {
  double r = 0.0;
  int n = 0;
  PercentileSummary misclustering;
  std::vector<double> samples;
};

struct BlockRecoveryReport {
  ExperimentPlan plan;
  std::vector<double> r_values;
  std::vector<int> n_values;
  int reps = 0;
  std::vector<BlockRecoveryCell> cells;
};

// Misclustering distributions across block strengths and network sizes.
// Covariate fixed at iid standard normal per dyad.
BlockRecoveryReport run_block_recovery(const ExperimentPlan& plan,
                                       const std::vector<double>& r_values,
                                       int reps);

struct SeVarianceReport {
  ExperimentPlan plan;
  int n = 0;
  int reps = 0;
  std::vector<EstimatorKind> estimators;
  std::vector<std::vector<double>> sd_per_sim;  // [estimator][covariate sim]
  std::vector<double> sd_of_se;                 // median across sims
  std::vector<double> mean_se;
  std::vector<long long> errors;
};

// Variability of the estimated SE(beta1) across error replicates at fixed
// covariates; the headline number is the median SD over covariate draws.
SeVarianceReport run_estimator_variance(const ExperimentPlan& plan);

Json to_json(const CoverageReport& report);
Json to_json(const TheoremGapReport& report);
Json to_json(const BlockRecoveryReport& report);
Json to_json(const SeVarianceReport& report);

std::string coverage_csv(const CoverageReport& report);
std::string theorem_gap_csv(const TheoremGapReport& report);
std::string block_recovery_csv(const BlockRecoveryReport& report);
std::string se_variance_csv(const SeVarianceReport& report);

}  // namespace netreg
