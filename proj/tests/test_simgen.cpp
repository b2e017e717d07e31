#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "netreg/errors.hpp"
#include "netreg/ols.hpp"
#include "netreg/simgen.hpp"
#include "test_util.hpp"

using namespace netreg;

TEST_SUITE_BEGIN("simgen");

TEST_CASE("block-strength parameterization expands exactly") {
  const double r = 0.25, a1 = 0.5;
  auto p = ErrorModelParams::from_r_alpha(r, a1);
  CHECK(p.sigma_a[0] == doctest::Approx(std::sqrt(2.0) * a1).epsilon(1e-15));
  CHECK(p.sigma_a[1] == doctest::Approx(std::sqrt(2.0) * r * a1).epsilon(1e-15));
  CHECK(p.sigma_b[0] == a1);
  CHECK(p.sigma_b[1] == r * a1);
  CHECK(p.sigma_z[0] == a1);
  CHECK(p.sigma_z[1] == r * a1);
  CHECK(p.sigma_gamma(0, 0) == a1);
  CHECK(p.sigma_gamma(0, 1) == doctest::Approx(std::sqrt(r) * a1).epsilon(1e-15));
  CHECK(p.sigma_gamma(1, 1) == r * a1);
  CHECK(p.sigma_eps == a1);
  CHECK(p.rho_ab == 0.5);
  CHECK(p.latent_dim == 2);
  CHECK_THROWS_AS(ErrorModelParams::from_r_alpha(0.0, 1.0), ValidationError);
}

TEST_CASE("true covariance: closed forms at r=1/4") {
  const double r = 0.25, a1 = 0.5;
  auto params = ErrorModelParams::from_r_alpha(r, a1);
  auto g = equal_blocks(8);
  auto truth = true_covariance(params, g);
  const double a2 = a1 * a1, a4 = a2 * a2;
  CHECK(truth.params.at(ConfigKey::sigma2(0, 0)) ==
        doctest::Approx(5 * a2 + 2 * a4).epsilon(1e-13));
  CHECK(truth.params.at(ConfigKey::sigma2(0, 1)) ==
        doctest::Approx((r * r + r + 3) * a2 + 2 * r * r * a4).epsilon(1e-13));
  CHECK(truth.params.at(ConfigKey::sigma2(1, 0)) ==
        doctest::Approx((2 * r * r + r + 2) * a2 + 2 * r * r * a4).epsilon(1e-13));
  CHECK(truth.params.at(ConfigKey::sigma2(1, 1)) ==
        doctest::Approx((4 * r * r + 1) * a2 + 2 * std::pow(r, 4) * a4).epsilon(1e-13));
  // Common-sender covariance in block 2 and the reciprocal within block 1.
  CHECK(truth.params.at(ConfigKey::phi_b(1, 0, 1)) ==
        doctest::Approx(2 * r * r * a2).epsilon(1e-13));
  CHECK(truth.params.at(ConfigKey::phi_a(0, 0)) ==
        doctest::Approx((std::sqrt(2.0) + 1) * a2 + 2 * a4).epsilon(1e-13));
  CHECK(truth.params.at(ConfigKey::phi_d(0, 1, 0)) ==
        doctest::Approx(a2 / std::sqrt(2.0)).epsilon(1e-13));
}

TEST_CASE("true covariance: r=1 removes block structure") {
  auto params = ErrorModelParams::from_r_alpha(1.0, 0.7);
  auto truth = true_covariance(params, equal_blocks(8));
  for (int m = 0; m < 5; ++m) {
    double first = 0.0;
    bool seen = false;
    for (const auto& [key, value] : truth.params) {
      if (static_cast<int>(key.config) != m) continue;
      if (!seen) {
        first = value;
        seen = true;
      }
      CHECK(value == doctest::Approx(first).epsilon(1e-13));
    }
  }
}

TEST_CASE("true covariance: block-1 terms dominate for r below 1") {
  for (double r : {0.25, 0.5, 0.75}) {
    auto truth =
        true_covariance(ErrorModelParams::from_r_alpha(r, 0.5), equal_blocks(8));
    auto v = [&](int u, int w) {
      return truth.params.at(ConfigKey::sigma2(u, w));
    };
    CHECK(v(0, 0) > v(0, 1));
    CHECK(v(0, 1) > v(1, 0));
    CHECK(v(1, 0) > v(1, 1));
    CHECK(truth.params.at(ConfigKey::phi_a(0, 0)) >
          truth.params.at(ConfigKey::phi_a(0, 1)));
    CHECK(truth.params.at(ConfigKey::phi_a(0, 1)) >
          truth.params.at(ConfigKey::phi_a(1, 1)));
    CHECK(truth.params.at(ConfigKey::phi_b(0, 0, 1)) >
          truth.params.at(ConfigKey::phi_b(1, 0, 1)));
    CHECK(truth.params.at(ConfigKey::phi_c(0, 0, 1)) >
          truth.params.at(ConfigKey::phi_c(1, 0, 1)));
    CHECK(truth.params.at(ConfigKey::phi_d(0, 0, 1)) >
          truth.params.at(ConfigKey::phi_d(1, 0, 1)));
  }
}

TEST_CASE("sample_errors: vanishing scales give vanishing errors") {
  ErrorModelParams p;
  p.num_blocks = 1;
  p.sigma_a = {1e-12};
  p.sigma_b = {1e-12};
  p.sigma_z = {1e-12};
  p.sigma_gamma = Eigen::MatrixXd::Constant(1, 1, 1e-12);
  p.sigma_eps = 1e-12;
  p.rho_ab = 0.0;
  RngStream rng(1, 2);
  auto xi = sample_errors(p, BlockAssignment::trivial(6), rng);
  CHECK(xi.lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("sample_errors: reciprocal covariance and difference variance") {
  const double r = 0.5, a1 = 0.6;
  auto params = ErrorModelParams::from_r_alpha(r, a1);
  BlockAssignment g({0, 1, 0}, 2);
  auto truth = true_covariance(params, g);

  const int draws = 100000;
  RngStream rng(77, 3);
  const int ij = DirectedNetwork::dyad_index(0, 1, 3);
  const int ji = DirectedNetwork::dyad_index(1, 0, 3);
  double sum_ij = 0, sum_ji = 0, sum_prod = 0, sum_diff2 = 0;
  std::vector<double> prods(draws);
  for (int t = 0; t < draws; ++t) {
    auto xi = sample_errors(params, g, rng);
    sum_ij += xi(ij);
    sum_ji += xi(ji);
    prods[static_cast<std::size_t>(t)] = xi(ij) * xi(ji);
    sum_prod += xi(ij) * xi(ji);
    const double d = xi(ij) - xi(ji);
    sum_diff2 += d * d;
  }
  const double mean_prod = sum_prod / draws;
  const double cov_hat =
      mean_prod - (sum_ij / draws) * (sum_ji / draws);
  double var_prod = 0;
  for (double v : prods) var_prod += (v - mean_prod) * (v - mean_prod);
  var_prod /= draws - 1;
  const double mc_se = std::sqrt(var_prod / draws);
  const double truth_phi_a = truth.params.at(ConfigKey::phi_a(0, 1));
  CHECK(std::fabs(cov_hat - truth_phi_a) < 3 * mc_se);

  // xi_ij - xi_ji drops the symmetric and latent-position terms.
  auto sa = [&](int b) { return params.sigma_a[static_cast<std::size_t>(b)]; };
  auto sb = [&](int b) { return params.sigma_b[static_cast<std::size_t>(b)]; };
  const double expect_diff_var =
      sa(0) * sa(0) + sb(0) * sb(0) - 2 * params.rho_ab * sa(0) * sb(0) +
      sa(1) * sa(1) + sb(1) * sb(1) - 2 * params.rho_ab * sa(1) * sb(1) +
      2 * params.sigma_eps * params.sigma_eps;
  const double diff_var_hat = sum_diff2 / draws;
  CHECK(diff_var_hat ==
        doctest::Approx(expect_diff_var).epsilon(0.05));
}

TEST_CASE("sample_covariates: degenerate match probability gives all ones") {
  CovariateSpec spec;
  spec.family = CovariateFamily::BinaryMatch;
  spec.match_prob = {1.0, 1.0};
  RngStream rng(5, 1);
  auto x = sample_covariates(spec, equal_blocks(6), rng);
  CHECK(x.isApprox(Eigen::VectorXd::Ones(30)));
}

TEST_CASE("sample_covariates: binary match probability formula") {
  CovariateSpec spec;
  spec.family = CovariateFamily::BinaryMatch;
  spec.match_prob = {0.8, 0.6};
  BlockAssignment g({0, 1, 1}, 2);
  RngStream rng(6, 1);
  const int ij = DirectedNetwork::dyad_index(0, 1, 3);
  const int draws = 100000;
  double matches = 0;
  for (int t = 0; t < draws; ++t) {
    auto x = sample_covariates(spec, g, rng);
    matches += x(ij);
  }
  const double expect = 0.8 * 0.6 + 0.2 * 0.4;  // p_i p_j + (1-p_i)(1-p_j)
  const double se = std::sqrt(expect * (1 - expect) / draws);
  CHECK(std::fabs(matches / draws - expect) < 3.5 * se);
}

TEST_CASE("sample_covariates: absolute difference variance formula") {
  CovariateSpec spec;
  spec.family = CovariateFamily::AbsDiff;
  spec.actor_sd = {1.3, 0.7};
  BlockAssignment g({0, 1, 0}, 2);
  RngStream rng(7, 1);
  const int ij = DirectedNetwork::dyad_index(0, 1, 3);
  const int draws = 100000;
  std::vector<double> xs(draws);
  double mean = 0;
  for (int t = 0; t < draws; ++t) {
    auto x = sample_covariates(spec, g, rng);
    xs[static_cast<std::size_t>(t)] = x(ij);
    mean += x(ij);
  }
  mean /= draws;
  double var = 0;
  for (double v : xs) var += (v - mean) * (v - mean);
  var /= draws - 1;
  const double expect = (1.3 * 1.3 + 0.7 * 0.7) * (1.0 - 2.0 / M_PI);
  CHECK(var == doctest::Approx(expect).epsilon(0.03));
  CHECK(covariate_variance(spec, 0, 1) ==
        doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("calibrate_nts: round trip and degenerate cases") {
  auto params = ErrorModelParams::from_r_alpha(0.25, 0.5);
  for (auto family : {CovariateFamily::AbsDiff, CovariateFamily::PairwiseNormal}) {
    for (auto setting : {CovariateSetting::Independent,
                         CovariateSetting::HighHigh, CovariateSetting::HighLow}) {
      auto spec = calibrate_nts(family, setting, params, 1.0, 0.45);
      CHECK(mean_nts(spec, params, 1.0) == doctest::Approx(0.45).epsilon(1e-6));
    }
  }
  // NTS formula for the pairwise-normal family: sigma^2/(sigma^2+b^2 a^2).
  auto spec = calibrate_nts(CovariateFamily::PairwiseNormal,
                            CovariateSetting::Independent, params, 1.0, 0.45);
  auto truth = true_covariance(params, equal_blocks(4));
  double total = 0.0;
  for (int u = 0; u < 2; ++u)
    for (int v = 0; v < 2; ++v) {
      const double s2 = truth.params.at(ConfigKey::sigma2(u, v));
      const double a2 = spec.pair_sd(u, v) * spec.pair_sd(u, v);
      total += s2 / (s2 + a2);
    }
  CHECK(total / 4.0 == doctest::Approx(0.45).epsilon(1e-6));
  CHECK_THROWS_AS(
      (void)calibrate_nts(CovariateFamily::AbsDiff,
                          CovariateSetting::Independent, params, 0.0, 0.45),
      NumericalError);
  CHECK_THROWS_AS(
      (void)calibrate_nts(CovariateFamily::AbsDiff,
                          CovariateSetting::Independent, params, 1.0, 1.5),
      ValidationError);
}

TEST_CASE("calibrated settings keep the documented 2:1 dispersion ratio") {
  auto params = ErrorModelParams::from_r_alpha(0.25, 0.5);
  auto hh = calibrate_nts(CovariateFamily::AbsDiff, CovariateSetting::HighHigh,
                          params, 1.0, 0.45);
  CHECK(hh.actor_sd[0] == doctest::Approx(2.0 * hh.actor_sd[1]).epsilon(1e-12));
  auto hl = calibrate_nts(CovariateFamily::AbsDiff, CovariateSetting::HighLow,
                          params, 1.0, 0.45);
  CHECK(hl.actor_sd[1] == doctest::Approx(2.0 * hl.actor_sd[0]).epsilon(1e-12));
}

TEST_CASE("generate_network: zero-noise limit reproduces beta through OLS") {
  ErrorModelParams p;
  p.num_blocks = 2;
  p.sigma_a = {1e-9, 1e-9};
  p.sigma_b = {1e-9, 1e-9};
  p.sigma_z = {1e-9, 1e-9};
  p.sigma_gamma = Eigen::MatrixXd::Constant(2, 2, 1e-9);
  p.sigma_eps = 1e-9;
  CovariateSpec spec;
  spec.family = CovariateFamily::PairwiseNormal;
  spec.pair_sd = Eigen::MatrixXd::Constant(2, 2, 1.0);
  Eigen::VectorXd beta(2);
  beta << 1.0, 1.0;
  auto sim = generate_network(10, beta, spec, p, 3);
  auto fit = ols_fit(sim.net);
  CHECK((fit.beta_hat - beta).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("generate_network: same seed is bit-identical") {
  auto params = ErrorModelParams::from_r_alpha(0.5, 0.5);
  CovariateSpec spec;
  spec.family = CovariateFamily::AbsDiff;
  spec.actor_sd = {1.0, 1.0};
  Eigen::VectorXd beta(2);
  beta << 1.0, 1.0;
  auto a = generate_network(8, beta, spec, params, 99);
  auto b = generate_network(8, beta, spec, params, 99);
  CHECK(a.net.response() == b.net.response());
  CHECK(a.net.covariates() == b.net.covariates());
  auto c = generate_network(8, beta, spec, params, 100);
  CHECK(a.net.response() != c.net.response());
}

TEST_CASE("generate_network: deep censoring zeroes every response") {
  auto params = ErrorModelParams::from_r_alpha(1.0, 0.01);
  CovariateSpec spec;
  spec.family = CovariateFamily::PairwiseNormal;
  spec.pair_sd = Eigen::MatrixXd::Constant(2, 2, 0.01);
  Eigen::VectorXd beta(2);
  beta << -10.0, 1.0;
  auto sim = generate_network(6, beta, spec, params, 4, true);
  CHECK(sim.net.response().isZero(0.0));
  for (bool c : sim.censored) CHECK(c);
}


TEST_CASE("ols with the true-covariance oracle SE covers the coefficients") {
  // beta = (1,1) at n=20; |beta_hat - beta| within 3 oracle SEs in at least
  // 99% of seeds.
  const int n = 20;
  const auto params = ErrorModelParams::from_r_alpha(0.25, 0.5);
  const auto spec = calibrate_nts(CovariateFamily::AbsDiff,
                                  CovariateSetting::Independent, params, 1.0,
                                  0.45);
  Eigen::VectorXd beta(2);
  beta << 1.0, 1.0;
  int bad = 0;
  const int seeds = 500;
  for (int seed = 0; seed < seeds; ++seed) {
    auto sim = generate_network(equal_blocks(n), beta, spec, params,
                                4000 + static_cast<std::uint64_t>(seed));
    auto fit = ols_fit(sim.net);
    SandwichParts parts(fit.design, sim.g);
    const Eigen::MatrixXd v =
        fit.xtx_inv * parts.xt_omega_x(sim.truth.params) * fit.xtx_inv;
    for (int k = 0; k < 2; ++k) {
      if (std::fabs(fit.beta_hat(k) - beta(k)) > 3.0 * std::sqrt(v(k, k))) {
        ++bad;
        break;
      }
    }
  }
  CHECK(bad <= seeds / 100);
}

TEST_CASE("generated errors are exchangeable within blocks") {
  // Swapping two same-block actors leaves every pairwise covariance alone;
  // check a common-sender covariance across the swap by Monte Carlo.
  BlockAssignment g({0, 0, 0, 1}, 2);
  const auto params = ErrorModelParams::from_r_alpha(0.5, 0.6);
  RngStream rng(55, 1);
  const int draws = 60000;
  const int d01 = DirectedNetwork::dyad_index(0, 1, 4);
  const int d02 = DirectedNetwork::dyad_index(0, 2, 4);
  const int d03 = DirectedNetwork::dyad_index(0, 3, 4);
  double c12 = 0, c13 = 0;  // Cov(xi_01, xi_02) vs Cov(xi_01, xi_03-swap...)
  std::vector<double> p12(draws), p13(draws);
  for (int t = 0; t < draws; ++t) {
    auto xi = sample_errors(params, g, rng);
    p12[static_cast<std::size_t>(t)] = xi(d01) * xi(d02);
    p13[static_cast<std::size_t>(t)] = xi(d01) * xi(d03);
    c12 += p12[static_cast<std::size_t>(t)];
    c13 += p13[static_cast<std::size_t>(t)];
  }
  c12 /= draws;
  c13 /= draws;
  // Actors 1 and 2 share a block: common-sender covariances with either as
  // the receiver coincide. Actor 3 sits in the other block; under this
  // generative model the common-sender covariance ignores the receiver's
  // block too, so all three agree with the closed form.
  const auto truth = true_covariance(params, g);
  const double expect = truth.params.at(ConfigKey::phi_b(0, 0, 0));
  double var12 = 0;
  for (double v : p12) var12 += (v - c12) * (v - c12);
  const double se = std::sqrt(var12 / (draws - 1.0) / draws);
  CHECK(std::fabs(c12 - expect) < 4 * se);
  CHECK(std::fabs(c13 - expect) < 4 * se);
  CHECK(std::fabs(c12 - c13) < 4 * se);
}

TEST_CASE("single-draw block estimates sit within 5 sampling SDs of truth") {
  const int n = 160;
  const auto params = ErrorModelParams::from_r_alpha(0.25, 0.5);
  const auto spec = calibrate_nts(CovariateFamily::AbsDiff,
                                  CovariateSetting::Independent, params, 1.0,
                                  0.45);
  Eigen::VectorXd beta(2);
  beta << 1.0, 1.0;
  const BlockAssignment g = equal_blocks(n);
  const auto truth = true_covariance(params, g);

  std::map<ConfigKey, std::vector<double>> draws;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    auto sim = generate_network(g, beta, spec, params,
                                7000 + static_cast<std::uint64_t>(rep));
    auto fit = ols_fit(sim.net);
    for (const auto& [key, value] : estimate_block(fit, g).params)
      draws[key].push_back(value);
  }
  int within = 0, total = 0;
  for (const auto& [key, values] : draws) {
    double mean = 0;
    for (double v : values) mean += v;
    mean /= reps;
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (reps - 1.0));
    ++total;
    if (std::fabs(values[0] - truth.params.at(key)) <= 5.0 * sd) ++within;
  }
  CHECK(within >= (total * 95 + 99) / 100);
}

TEST_SUITE_END();
