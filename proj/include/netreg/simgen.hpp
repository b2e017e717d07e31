#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "netreg/covariance.hpp"
#include "netreg/network.hpp"
#include "netreg/rng.hpp"

namespace netreg {

// Latent-space error model: xi_ij = a_i + b_j + z_i.z_j + gamma_(ij) + eps_ij
// with jointly normal components whose scales depend on actor blocks.
struct ErrorModelParams {
  int num_blocks = 2;
  std::vector<double> sigma_a;   // sender effect SD per block
  std::vector<double> sigma_b;   // receiver effect SD per block
  std::vector<double> sigma_z;   // latent position SD per block
  Eigen::MatrixXd sigma_gamma;   // symmetric dyad effect SD per block pair
  double rho_ab = 0.0;           // sender/receiver effect correlation
  int latent_dim = 2;
  double sigma_eps = 1.0;

  void validate() const;

  // Two-block family indexed by block strength r in (0,1] and scale alpha1:
  // block 2 scales are r times block 1 scales, the cross dyad-effect scale is
  // the geometric mean, rho fixed at 0.5, latent dimension 2. r=1 removes all
  // block structure.
  static ErrorModelParams from_r_alpha(double r, double alpha1);
};

enum class CovariateFamily { BinaryMatch, AbsDiff, PairwiseNormal };
enum class CovariateSetting { Independent, HighHigh, HighLow };

// One covariate per dyad, from one of three families. "HighHigh" ties the
// covariate dispersion to the high-error-variance block (block 1), "HighLow"
// to the other; block dispersions differ by a fixed 2:1 ratio.
struct CovariateSpec {
  CovariateFamily family = CovariateFamily::AbsDiff;
  CovariateSetting setting = CovariateSetting::Independent;
  std::vector<double> match_prob;  // BinaryMatch: p per block
  std::vector<double> actor_sd;    // AbsDiff: a per block
  Eigen::MatrixXd pair_sd;         // PairwiseNormal: a per block pair

  void validate(int num_blocks) const;
};

// Spec skeleton (parameters unfilled) for a family/setting; dispersion comes
// from calibrate_nts or a direct scale.
CovariateSpec make_covariate_spec(CovariateFamily family,
                                  CovariateSetting setting, double scale,
                                  int num_blocks = 2);

// Exact block-exchangeable covariance implied by the generative model. The
// generative model constrains the common-sender covariance to the sender's
// block (and so on), so all finer keys share those values.
CovarianceModel true_covariance(const ErrorModelParams& params,
                                const BlockAssignment& g);

// Error vector in canonical order.
Eigen::VectorXd sample_errors(const ErrorModelParams& params,
                              const BlockAssignment& g, RngStream& rng);

// One covariate value per dyad in canonical order.
Eigen::VectorXd sample_covariates(const CovariateSpec& spec,
                                  const BlockAssignment& g, RngStream& rng);

// Var(X_ij | g_i=u, g_j=v) in closed form.
double covariate_variance(const CovariateSpec& spec, int u, int v);

// Mean over the four block-pair conditionings of
// Var(xi) / (Var(xi) + beta1^2 Var(X)). Two blocks only.
double mean_nts(const CovariateSpec& spec, const ErrorModelParams& params,
                double beta1);

// Solves the family dispersion scale so mean_nts equals target, holding the
// error parameters fixed. Bisection to 1e-8; throws NumericalError when no
// root exists in the family's admissible range.
CovariateSpec calibrate_nts(CovariateFamily family, CovariateSetting setting,
                            const ErrorModelParams& params, double beta1,
                            double target);

// Equal halves: first ceil(n/2) actors in block 1.
BlockAssignment equal_blocks(int n);
// Equal halves in shuffled actor positions.
BlockAssignment shuffled_equal_blocks(int n, RngStream& rng);

struct SimulatedNetwork {
  DirectedNetwork net;
  BlockAssignment g;
  Eigen::VectorXd errors;
  Eigen::VectorXd y_star;       // latent response before censoring
  std::vector<bool> censored;   // y_star < 0, only when censoring requested
  CovarianceModel truth;
};

SimulatedNetwork generate_network(const BlockAssignment& g,
                                  const Eigen::VectorXd& beta,
                                  const CovariateSpec& spec,
                                  const ErrorModelParams& params,
                                  std::uint64_t seed, bool censor = false);

SimulatedNetwork generate_network(int n, const Eigen::VectorXd& beta,
                                  const CovariateSpec& spec,
                                  const ErrorModelParams& params,
                                  std::uint64_t seed, bool censor = false);

}  // namespace netreg
