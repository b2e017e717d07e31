#include <doctest.h>

#include <Eigen/Dense>

#include "netreg/blockdetect.hpp"
#include "netreg/errors.hpp"
#include "netreg/ols.hpp"
#include "netreg/simgen.hpp"
#include "test_util.hpp"

using namespace netreg;
using testutil::fit_from_residuals;
using testutil::random_residuals;

namespace {

// Simulated fit with the block-strength error model, residuals from a plain
// OLS on an iid normal covariate.
RegressionFit simulated_fit(int n, double r, std::uint64_t seed,
                            BlockAssignment* g_out = nullptr) {
  CovariateSpec spec;
  spec.family = CovariateFamily::PairwiseNormal;
  spec.setting = CovariateSetting::Independent;
  spec.pair_sd = Eigen::MatrixXd::Constant(2, 2, 1.0);
  auto params = ErrorModelParams::from_r_alpha(r, 0.5);
  Eigen::VectorXd beta(2);
  beta << 1.0, 1.0;
  auto sim = generate_network(equal_blocks(n), beta, spec, params, seed);
  if (g_out) *g_out = sim.g;
  return ols_fit(sim.net);
}

double brute_ks(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  auto cdf = [](const std::vector<double>& v, double x) {
    std::size_t c = 0;
    for (double t : v)
      if (t <= x) ++c;
    return static_cast<double>(c) / static_cast<double>(v.size());
  };
  for (double x : a) d = std::max(d, std::fabs(cdf(a, x) - cdf(b, x)));
  for (double x : b) d = std::max(d, std::fabs(cdf(a, x) - cdf(b, x)));
  return d;
}

}  // namespace

TEST_SUITE_BEGIN("blockdetect");

TEST_CASE("residual product sets have the stated cardinalities") {
  const int n = 10;
  auto sets = residual_product_sets(fit_from_residuals(random_residuals(n, 1), n));
  for (int i = 0; i < n; ++i) {
    const auto& s = sets.sets[static_cast<std::size_t>(i)];
    CHECK(s[static_cast<int>(Config::Sigma2)].size() == 2 * (n - 1));
    CHECK(s[static_cast<int>(Config::PhiA)].size() == n - 1);
    CHECK(s[static_cast<int>(Config::PhiB)].size() == (n - 1) * (n - 2));
    CHECK(s[static_cast<int>(Config::PhiC)].size() == (n - 1) * (n - 2));
    CHECK(s[static_cast<int>(Config::PhiD)].size() == (n - 1) * (n - 2));
  }
}

TEST_CASE("residual product sets: all-ones residuals") {
  const int n = 3;
  auto sets =
      residual_product_sets(fit_from_residuals(Eigen::VectorXd::Ones(6), n));
  for (int i = 0; i < n; ++i)
    for (int m = 0; m < 5; ++m)
      for (double v : sets.sets[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)])
        CHECK(v == 1.0);
}

TEST_CASE("quantile compression returns m points per set") {
  const int n = 8;
  auto sets = residual_product_sets(
      fit_from_residuals(random_residuals(n, 2), n), 25);
  CHECK(sets.compressed);
  for (const auto& actor : sets.sets)
    for (const auto& s : actor) CHECK(s.size() == 25);
}

TEST_CASE("ks_statistic basics") {
  CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_statistic({0, 0}, {1, 1}) == 1.0);
  CHECK(ks_statistic({1, 2, 3}, {1.5, 2.5, 3.5}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS((void)ks_statistic({}, {1.0}), ValidationError);
}

TEST_CASE("ks_statistic is symmetric and matches brute force") {
  RngStream rng(3, 1);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a, b;
    const int na = 1 + static_cast<int>(rng.uniform_index(30));
    const int nb = 1 + static_cast<int>(rng.uniform_index(30));
    for (int i = 0; i < na; ++i)
      a.push_back(std::round(rng.normal() * 4.0) / 4.0);  // force ties
    for (int i = 0; i < nb; ++i) b.push_back(std::round(rng.normal() * 4.0) / 4.0);
    const double d1 = ks_statistic(a, b);
    const double d2 = ks_statistic(b, a);
    CHECK(d1 == d2);
    CHECK(d1 == doctest::Approx(brute_ks(a, b)).epsilon(1e-14));
    CHECK(d1 >= 0.0);
    CHECK(d1 <= 1.0);
  }
}

TEST_CASE("similarity matrix: constant residuals are fully similar") {
  const int n = 5;
  auto sets =
      residual_product_sets(fit_from_residuals(Eigen::VectorXd::Ones(20), n));
  auto s = similarity_matrix(sets);
  CHECK(s.isApprox(Eigen::MatrixXd::Ones(n, n)));
}

TEST_CASE("similarity matrix: range, diagonal, symmetry") {
  const int n = 8;
  auto sets = residual_product_sets(fit_from_residuals(random_residuals(n, 4), n));
  auto s = similarity_matrix(sets);
  CHECK(s == s.transpose().eval());
  for (int i = 0; i < n; ++i) {
    CHECK(s(i, i) == 1.0);
    for (int j = 0; j < n; ++j) {
      CHECK(s(i, j) >= 0.0);
      CHECK(s(i, j) <= 1.0);
    }
  }
}

TEST_CASE("similarity matrix is identical across thread counts") {
  const int n = 10;
  auto sets = residual_product_sets(fit_from_residuals(random_residuals(n, 5), n));
  auto s1 = similarity_matrix(sets, 1);
  auto s4 = similarity_matrix(sets, 4);
  CHECK(s1 == s4);
}

TEST_CASE("knn graph: complete at K=n-1, OR rule, tie handling") {
  const int n = 5;
  Eigen::MatrixXd s = Eigen::MatrixXd::Ones(n, n);
  RngStream rng(6, 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) s(i, j) = s(j, i) = rng.uniform();

  auto w = knn_graph(s, n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) CHECK(w(i, j) == (i == j ? 0.0 : s(i, j)));

  CHECK_THROWS_AS((void)knn_graph(s, 0), ValidationError);
  CHECK_THROWS_AS((void)knn_graph(s, n), ValidationError);

  // Asymmetric neighborhoods: actor 0 is actor 3's top neighbor but not the
  // reverse; the OR rule still links them.
  Eigen::MatrixXd t(4, 4);
  t << 1.0, 0.9, 0.8, 0.5,
       0.9, 1.0, 0.7, 0.2,
       0.8, 0.7, 1.0, 0.3,
       0.5, 0.2, 0.3, 1.0;
  auto wt = knn_graph(t, 1);
  CHECK(wt(0, 3) == 0.5);  // 0 is 3's nearest even though 3 is not 0's
  CHECK(wt(1, 3) == 0.0);

  // Ties at the K-th similarity: closed neighborhood keeps all tied actors.
  Eigen::MatrixXd tie = Eigen::MatrixXd::Ones(4, 4);
  tie << 1.0, 0.6, 0.6, 0.6,
         0.6, 1.0, 0.1, 0.1,
         0.6, 0.1, 1.0, 0.1,
         0.6, 0.1, 0.1, 1.0;
  auto wtie = knn_graph(tie, 1);
  CHECK(wtie(1, 0) == 0.6);
  CHECK(wtie(2, 0) == 0.6);
  CHECK(wtie(3, 0) == 0.6);
}

TEST_CASE("spectral clustering separates two disconnected cliques") {
  const int n = 8;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && (i < 4) == (j < 4)) w(i, j) = 1.0;
  auto res = spectral_cluster(w, 2, 42);
  BlockAssignment truth({0, 0, 0, 0, 1, 1, 1, 1}, 2);
  CHECK(misclustering(truth, res.assignment) == 0.0);
  CHECK(res.warnings.empty());

  // Unnormalized Laplacian identities.
  Eigen::VectorXd deg = w.rowwise().sum();
  Eigen::MatrixXd lap = -w;
  lap.diagonal() += deg;
  CHECK((lap * Eigen::VectorXd::Ones(n)).lpNorm<Eigen::Infinity>() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
  CHECK(eig.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("spectral clustering warns on more components than blocks") {
  const int n = 9;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && i / 3 == j / 3) w(i, j) = 1.0;
  auto res = spectral_cluster(w, 2, 1);
  REQUIRE(res.warnings.size() == 1);
  CHECK(res.warnings[0].find("3 connected components") != std::string::npos);
}

TEST_CASE("eigengap: disconnected components rank first and eigenvalues sort") {
  const int n = 9;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && (i < 5) == (j < 5)) w(i, j) = 0.8;
  auto res = eigengap_select(w, 5);
  CHECK(res.ranked_b.front() == 2);
  for (int k = 1; k < res.eigenvalues.size(); ++k)
    CHECK(res.eigenvalues(k) >= res.eigenvalues(k - 1));

  // Three cliques give exactly three numerically zero eigenvalues.
  Eigen::MatrixXd w3 = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && i / 3 == j / 3) w3(i, j) = 1.0;
  auto res3 = eigengap_select(w3, 8);
  int zeros = 0;
  for (int k = 0; k < res3.eigenvalues.size(); ++k)
    if (std::fabs(res3.eigenvalues(k)) < 1e-8) ++zeros;
  CHECK(zeros == 3);
  CHECK(res3.ranked_b.front() == 3);
}

TEST_CASE("misclustering: identity, label swap, single error, B cap") {
  BlockAssignment a({0, 0, 1, 1}, 2);
  BlockAssignment swapped({1, 1, 0, 0}, 2);
  BlockAssignment off({0, 0, 1, 0}, 2);
  CHECK(misclustering(a, a) == 0.0);
  CHECK(misclustering(a, swapped) == 0.0);
  CHECK(misclustering(a, off) == 0.25);
  std::vector<int> big(20);
  for (int i = 0; i < 20; ++i) big[static_cast<std::size_t>(i)] = i % 9;
  BlockAssignment g9(big, 9);
  CHECK_THROWS_AS((void)misclustering(g9, g9), ValidationError);
}

TEST_CASE("pipeline: fixed seed and inputs give identical assignments") {
  auto fit = simulated_fit(24, 0.25, 7);
  BlockDetectOptions opts;
  opts.num_blocks = 2;
  opts.seed = 99;
  auto a = detect_blocks(fit, opts);
  auto b = detect_blocks(fit, opts);
  CHECK(a.assignment.labels == b.assignment.labels);
  opts.n_threads = 4;
  auto c = detect_blocks(fit, opts);
  CHECK(a.assignment.labels == c.assignment.labels);
}

TEST_CASE("pipeline: actor relabeling permutes the assignment") {
  const int n = 40;
  BlockAssignment g;
  auto fit = simulated_fit(n, 0.25, 11, &g);

  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    perm[static_cast<std::size_t>(i)] = (i * 13 + 5) % n;
  Eigen::VectorXd rp(fit.residuals.size());
  for (int idx = 0; idx < fit.residuals.size(); ++idx) {
    auto [i, j] = DirectedNetwork::dyad_at(idx, n);
    rp(DirectedNetwork::dyad_index(perm[static_cast<std::size_t>(i)],
                                   perm[static_cast<std::size_t>(j)], n)) =
        fit.residuals(idx);
  }
  BlockDetectOptions opts;
  opts.num_blocks = 2;
  opts.seed = 5;
  auto base = detect_blocks(fit, opts);
  auto permuted = detect_blocks(fit_from_residuals(rp, n), opts);
  std::vector<int> mapped(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    mapped[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        base.assignment[i];
  CHECK(misclustering(BlockAssignment(mapped, 2), permuted.assignment) == 0.0);
}

TEST_CASE("block structure separates within/between similarity at r=1/4") {
  const int n = 80;
  BlockAssignment g;
  auto fit = simulated_fit(n, 0.25, 13, &g);
  auto sets = residual_product_sets(fit, 200);
  auto s = similarity_matrix(sets);
  double within = 0.0, between = 0.0;
  long nw = 0, nb = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (g[i] == g[j]) {
        within += s(i, j);
        ++nw;
      } else {
        between += s(i, j);
        ++nb;
      }
    }
  CHECK(within / nw > between / nb);
}

TEST_CASE("quantile compression changes each KS statistic by less than 0.02") {
  const int n = 80;
  double max_diff = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto fit = simulated_fit(n, 0.25, 100 + seed);
    auto exact = residual_product_sets(fit);
    auto compressed = residual_product_sets(fit, 100);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        for (int m = 0; m < 5; ++m) {
          const double ke = ks_statistic_sorted(
              exact.sets[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)],
              exact.sets[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)]);
          const double kc = ks_statistic_sorted(
              compressed.sets[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)],
              compressed.sets[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)]);
          max_diff = std::max(max_diff, std::fabs(ke - kc));
        }
      }
    }
  }
  CHECK(max_diff < 0.02);
}

TEST_SUITE_END();
