#pragma once

#include <Eigen/Dense>

#include "netreg/network.hpp"

namespace netreg {

struct RegressionFit {
  Eigen::VectorXd beta_hat;   // length p, intercept first
  Eigen::VectorXd residuals;  // length n(n-1), canonical order
  Eigen::MatrixXd xtx_inv;    // (X^T X)^{-1}, p x p
  Eigen::MatrixXd design;     // X, n(n-1) x p
  int n = 0;                  // actor count
};

// Design matrix with a leading all-ones column, rows in canonical dyad order,
// plus the response vector.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> build_design_matrix(
    const DirectedNetwork& net);

// OLS through a column-pivoted QR decomposition. Throws NumericalError when
// the design is rank deficient or conditioned worse than rcond 1e-12.
RegressionFit ols_fit(const DirectedNetwork& net);

// Same solver for a caller-supplied design (used by the simulation harness
// where X is built once and reused across error replicates).
RegressionFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      int n_actors);

}  // namespace netreg
