#include "netreg/ols.hpp"

#include <cmath>

#include "netreg/errors.hpp"

namespace netreg {

std::pair<Eigen::MatrixXd, Eigen::VectorXd> build_design_matrix(
    const DirectedNetwork& net) {
  const int nd = net.num_dyads();
  Eigen::MatrixXd X(nd, 1 + net.num_covariates());
  X.col(0).setOnes();
  if (net.num_covariates() > 0) X.rightCols(net.num_covariates()) = net.covariates();
  return {std::move(X), net.response()};
}

RegressionFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      int n_actors) {
  const auto p = X.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) throw NumericalError("design matrix not full rank");
  const Eigen::VectorXd rdiag = qr.matrixR().topLeftCorner(p, p).diagonal();
  const double rmax = rdiag.cwiseAbs().maxCoeff();
  const double rmin = rdiag.cwiseAbs().minCoeff();
  if (rmin < 1e-12 * rmax)
    throw NumericalError("design matrix not full rank (rcond below 1e-12)");

  RegressionFit fit;
  fit.beta_hat = qr.solve(y);
  fit.residuals = y - X * fit.beta_hat;
  // (X^T X)^{-1} = P R^{-1} R^{-T} P^T from the pivoted factorization.
  Eigen::MatrixXd rinv =
      qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>().solve(
          Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd inv_unpermuted = rinv * rinv.transpose();
  const auto& perm = qr.colsPermutation();
  fit.xtx_inv = perm * inv_unpermuted * perm.transpose();
  fit.design = X;
  fit.n = n_actors;
  return fit;
}

RegressionFit ols_fit(const DirectedNetwork& net) {
  auto [X, y] = build_design_matrix(net);
  return ols_fit(X, y, net.n());
}

}  // namespace netreg
