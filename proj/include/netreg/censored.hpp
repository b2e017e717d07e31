#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netreg/config_key.hpp"
#include "netreg/network.hpp"

namespace netreg {

// Standard bivariate normal CDF P(Z1 <= h, Z2 <= k) with correlation rho;
// Gauss-Legendre evaluation of the single-integral reduction, absolute error
// well below 1e-7. Throws on NaN inputs.
double bvn_cdf(double h, double k, double rho);

// Moments of one observation pair under the censored regression model.
struct PairLikelihoodContext {
  double mean1 = 0.0, mean2 = 0.0;
  double var1 = 1.0, var2 = 1.0;
  double cov = 0.0;
  bool censored1 = false, censored2 = false;

  double rho() const { return cov / std::sqrt(var1 * var2); }
};

// Log-likelihood of the pair (y1, y2): bivariate density when both are
// positive, density times conditional CDF when one is censored at zero, and
// the joint CDF at the origin when both are. Returns -inf (flagged via the
// optional counter) when a probability underflows to zero.
double pair_loglik(const PairLikelihoodContext& ctx, double y1, double y2,
                   long* underflow_count = nullptr);

// Same value plus the gradient with respect to
// (mean1, mean2, var1, var2, cov).
double pair_loglik_grad(const PairLikelihoodContext& ctx, double y1, double y2,
                        Eigen::Matrix<double, 5, 1>& grad);

// Univariate censored (tobit) log-likelihood and gradient wrt (mean, var).
double censored_loglik1(double mean, double var, double y, bool censored);
double censored_loglik1_grad(double mean, double var, double y, bool censored,
                             Eigen::Vector2d& grad);

struct CensoredFitOptions {
  double var_min = 1e-2;   // lower bound on variance parameters
  double rho_max = 0.9;    // correlation bound
  int min_pairs = 30;      // subproblems below this are dropped
  int max_iterations = 500;
  double grad_tol = 1e-6;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int n_threads = 1;
};

// One pseudo-likelihood optimization: the observation pairs of a single
// configuration key, the regression coefficients, the one or two variance
// parameters those observations carry, and (except same-dyad keys) the
// covariance parameter of the key.
struct SubProblem {
  int index = 0;
  ConfigKey key;
  // Dyad index pairs; second == -1 for same-dyad (univariate) entries.
  std::vector<std::pair<int, int>> pairs;
  // Which variance slot (0/1) each pair member uses.
  std::vector<std::pair<int, int>> var_slots;
  std::vector<ConfigKey> var_keys;  // one or two same-dyad keys
  bool has_cov = false;

  int n_params(int p) const {
    return p + static_cast<int>(var_keys.size()) + (has_cov ? 1 : 0);
  }
  long long n_observations() const;
};

// Partitions observation pairs so no observation is shared between (or
// within) subproblems: candidates are visited in seeded shuffled order,
// round-robin across subproblems, and a pair is taken only when both of its
// observations are still unused. This is what zeroes the cross-subproblem
// score covariances.
std::vector<SubProblem> build_subproblems(const DirectedNetwork& net,
                                          const BlockAssignment& g,
                                          std::uint64_t seed);

struct SubProblemFit {
  Eigen::VectorXd theta;     // beta..., variances..., covariance
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  long underflows = 0;
  Eigen::MatrixXd a_hat;     // -Hessian of the sub-log-likelihood
  Eigen::MatrixXd b_hat;     // sum of per-pair score outer products
  Eigen::MatrixXd sigma;     // A^{-1} B A^{-1}
};

SubProblemFit fit_subproblem(const SubProblem& s, const DirectedNetwork& net,
                             const Eigen::MatrixXd& design,
                             const CensoredFitOptions& opts,
                             const Eigen::VectorXd& beta_init,
                             const std::map<ConfigKey, double>& var_init);

struct CombinedEstimate {
  std::vector<std::string> names;  // beta0.., then covariance keys
  Eigen::VectorXd theta;
  Eigen::MatrixXd vcov;
  Eigen::MatrixXd weights;  // rows sum to one
};

// Sample-size weighted average across subproblems (Var from the
// block-diagonal subproblem covariances).
CombinedEstimate combine_estimates(const std::vector<SubProblem>& subs,
                                   const std::vector<SubProblemFit>& fits,
                                   int p);

struct SubproblemDiagnostics {
  ConfigKey key;
  long long pairs = 0;
  long long observations = 0;
  bool dropped = false;
  bool converged = false;
  int iterations = 0;
  double loglik = 0.0;
  long underflows = 0;
};

struct CensoredFitResult {
  Eigen::VectorXd beta_hat, se, ci_lower, ci_upper;
  Eigen::MatrixXd vcov_beta;
  std::map<ConfigKey, double> cov_params;
  std::vector<SubproblemDiagnostics> diagnostics;
  std::vector<std::string> warnings;
  double censored_fraction = 0.0;
};

// End-to-end pairwise pseudo-likelihood fit on a zero-censored network with
// known blocks. Throws ValidationError when every response is censored.
CensoredFitResult censored_fit(const DirectedNetwork& net,
                               const BlockAssignment& g,
                               const CensoredFitOptions& opts);

}  // namespace netreg
