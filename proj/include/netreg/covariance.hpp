#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>

#include "netreg/config_key.hpp"
#include "netreg/network.hpp"
#include "netreg/ols.hpp"

namespace netreg {

enum class CovKind { DyadicClustering, Exchangeable, BlockExchangeable };

// Residual covariance model. Exchangeable and block-exchangeable models hold
// one parameter per configuration key (exchangeable is the B=1 special
// case); dyadic clustering keeps the residual vector and no parameter map.
// Entries of the realized matrix are structurally zero whenever the two
// dyads share no actor.
struct CovarianceModel {
  CovKind kind = CovKind::Exchangeable;
  std::map<ConfigKey, double> params;
  std::map<ConfigKey, long long> counts;
  std::optional<BlockAssignment> blocks;
  Eigen::VectorXd residuals;  // DC only
  int n = 0;
};

// Dyadic clustering: each structurally nonzero entry is the single product
// of the two residuals.
CovarianceModel estimate_dc(const RegressionFit& fit);

// Moment estimator given block memberships: every parameter is the plain
// average of the residual products in its configuration set. Keys whose sets
// are empty are absent from the map.
CovarianceModel estimate_block(const RegressionFit& fit,
                               const BlockAssignment& g);

// Five-parameter estimator; identical to estimate_block with one block.
CovarianceModel estimate_exchangeable(const RegressionFit& fit);

// Dense n(n-1) x n(n-1) realization. Throws NumericalError naming the key if
// a required parameter is missing. Symmetric by construction.
Eigen::MatrixXd realize_omega(const CovarianceModel& model);

// X^T Omega X accumulated from per-actor sums without materializing Omega.
// For parameterized models the result is sum_key theta_key * S_key where the
// S matrices depend only on (X, g); SandwichParts caches them so repeated
// evaluations with fresh parameter values are cheap.
class SandwichParts {
public:
  SandwichParts(const Eigen::MatrixXd& X, const BlockAssignment& g);

  // Requires a parameter for every key realizable under g.
  Eigen::MatrixXd xt_omega_x(const std::map<ConfigKey, double>& params) const;

  const std::map<ConfigKey, Eigen::MatrixXd>& s_matrices() const {
    return s_;
  }

private:
  std::map<ConfigKey, Eigen::MatrixXd> s_;
};

Eigen::MatrixXd xt_omega_x_dc(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& residuals, int n);

// Plug-in covariance of the OLS coefficients (no positivity check).
Eigen::MatrixXd sandwich_vcov(const RegressionFit& fit,
                              const CovarianceModel& model);

struct SandwichResult {
  Eigen::MatrixXd vcov;
  Eigen::VectorXd se;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  double alpha = 0.05;
};

// Sandwich covariance with normal-quantile confidence intervals. Throws
// NumericalError if any estimated coefficient variance is negative (the
// moment-based Omega estimate need not be PSD).
SandwichResult sandwich(const RegressionFit& fit, const CovarianceModel& model,
                        double alpha = 0.05);

// n * (V_B - V_E), the scaled gap between block-exchangeable and
// exchangeable sandwich estimates from the same fit.
Eigen::MatrixXd theorem_gap(const RegressionFit& fit,
                            const CovarianceModel& model_block,
                            const CovarianceModel& model_exch);

}  // namespace netreg
