#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "netreg/config_key.hpp"
#include "netreg/network.hpp"
#include "netreg/ols.hpp"
#include "netreg/rng.hpp"

namespace testutil {

using namespace netreg;

// Fit shell around given residuals (no regression behind it).
inline RegressionFit fit_from_residuals(const Eigen::VectorXd& r, int n) {
  RegressionFit fit;
  fit.residuals = r;
  fit.n = n;
  return fit;
}

inline Eigen::VectorXd random_residuals(int n, std::uint64_t seed) {
  RngStream rng(seed, 7);
  Eigen::VectorXd r(n * (n - 1));
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = rng.normal();
  return r;
}

// Literal transcription of the known-block moment estimator: walk every
// ordered dyad pair, classify it, and average the residual products per key.
// Independent of the accumulator-based production path.
inline std::map<ConfigKey, std::pair<double, long long>> naive_moment_sums(
    const Eigen::VectorXd& r, const BlockAssignment& g) {
  const int n = g.n();
  const int nd = n * (n - 1);
  std::map<ConfigKey, std::pair<double, long long>> acc;
  for (int a = 0; a < nd; ++a) {
    auto [i, j] = DirectedNetwork::dyad_at(a, n);
    for (int b = 0; b < nd; ++b) {
      auto [k, l] = DirectedNetwork::dyad_at(b, n);
      auto key = classify_pair({i, j}, {k, l}, g);
      if (!key) continue;
      // Match the canonical set orientation: the mixed configuration is
      // enumerated only as [(i,j),(k,i)].
      if (key->config == Config::PhiD && j == k && i != l) continue;
      auto& slot = acc[*key];
      slot.first += r(a) * r(b);
      slot.second += 1;
    }
  }
  return acc;
}

inline std::map<ConfigKey, double> naive_moment_estimates(
    const Eigen::VectorXd& r, const BlockAssignment& g) {
  std::map<ConfigKey, double> out;
  for (const auto& [key, sum_count] : naive_moment_sums(r, g))
    out[key] = sum_count.first / static_cast<double>(sum_count.second);
  return out;
}

inline DirectedNetwork random_network(int n, int k, std::uint64_t seed) {
  RngStream rng(seed, 11);
  const int nd = n * (n - 1);
  Eigen::VectorXd y(nd);
  Eigen::MatrixXd x(nd, k);
  for (int i = 0; i < nd; ++i) {
    for (int c = 0; c < k; ++c) x(i, c) = rng.normal();
    y(i) = rng.normal();
  }
  return DirectedNetwork(n, std::move(y), std::move(x));
}

}  // namespace testutil
