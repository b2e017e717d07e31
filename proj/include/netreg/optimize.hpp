#pragma once

#include <Eigen/Dense>
#include <functional>

namespace netreg {

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  bool converged = false;
};

// Dense BFGS minimizer with Armijo backtracking. The objective must fill the
// gradient when the pointer is non-null. Convergence: gradient inf-norm
// below gtol.
inline OptimResult bfgs_minimize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& fn,
    const Eigen::VectorXd& x0, int max_iter = 500, double gtol = 1e-6) {
  const auto dim = x0.size();
  OptimResult res;
  res.x = x0;
  Eigen::VectorXd g(dim);
  res.f = fn(res.x, &g);
  res.grad = g;
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(dim, dim);

  for (int iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter;
    if (g.lpNorm<Eigen::Infinity>() < gtol) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd dir = -(h_inv * g);
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {  // reset on a non-descent direction
      h_inv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
    }
    double step = 1.0;
    double f_new = res.f;
    Eigen::VectorXd x_new = res.x, g_new = g;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      x_new = res.x + step * dir;
      f_new = fn(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.converged = g.lpNorm<Eigen::Infinity>() < 1e3 * gtol;
      return res;
    }
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd hy = h_inv * y;
      const double yhy = y.dot(hy);
      h_inv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
               (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    res.grad = g;
  }
  res.iterations = max_iter;
  res.converged = g.lpNorm<Eigen::Infinity>() < gtol;
  return res;
}

}  // namespace netreg
