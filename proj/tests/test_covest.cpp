#include <doctest.h>

#include <Eigen/Dense>
#include <set>

#include "netreg/covariance.hpp"
#include "netreg/errors.hpp"
#include "netreg/normal.hpp"
#include "test_util.hpp"

using namespace netreg;
using testutil::fit_from_residuals;
using testutil::random_residuals;

namespace {

// A and B in block 1, C and D in block 2 (actors 0..3).
BlockAssignment fig1_blocks() { return BlockAssignment({0, 0, 1, 1}, 2); }

BlockAssignment two_blocks(int n) {
  std::vector<int> g(static_cast<std::size_t>(n), 1);
  for (int i = 0; i < n / 2; ++i) g[static_cast<std::size_t>(i)] = 0;
  return BlockAssignment(std::move(g), 2);
}

}  // namespace

TEST_SUITE_BEGIN("covest");

TEST_CASE("classify_pair: same dyad gives the ordered variance key") {
  // (C,A) with A,B in block 1 and C,D in block 2: sender block 2, receiver 1.
  auto g = fig1_blocks();
  auto key = classify_pair({2, 0}, {2, 0}, g);
  REQUIRE(key.has_value());
  CHECK(key->config == Config::Sigma2);
  CHECK(key->to_string() == "sigma2:(2,1)");
}

TEST_CASE("classify_pair: common receiver is the phiC configuration") {
  // (A,B) and (C,B): receiver B in block 1, senders A (1) and C (2).
  auto g = fig1_blocks();
  auto key = classify_pair({0, 1}, {2, 1}, g);
  REQUIRE(key.has_value());
  CHECK(key->config == Config::PhiC);
  CHECK(key->to_string() == "phiC:(1,{1,2})");
}

TEST_CASE("classify_pair: disjoint dyads are structurally zero") {
  auto g = BlockAssignment({0, 0, 0, 0}, 1);
  CHECK(!classify_pair({0, 1}, {2, 3}, g).has_value());
}

TEST_CASE("classify_pair: remaining configurations") {
  auto g = fig1_blocks();
  CHECK(classify_pair({0, 1}, {1, 0}, g)->config == Config::PhiA);
  CHECK(classify_pair({0, 1}, {0, 2}, g)->config == Config::PhiB);
  // [(i,j),(k,i)]: shared actor's block leads, then g_j, then g_k.
  auto mixed = classify_pair({0, 1}, {2, 0}, g);
  REQUIRE(mixed.has_value());
  CHECK(mixed->config == Config::PhiD);
  CHECK(mixed->to_string() == "phiD:(1,1,2)");
  // Mirrored orientation maps to the same key family with the shared actor
  // first: [(1,0),(0,3)] shares actor 0 as receiver-then-sender.
  auto mirrored = classify_pair({1, 0}, {0, 3}, g);
  REQUIRE(mirrored.has_value());
  CHECK(mirrored->config == Config::PhiD);
  CHECK(mirrored->to_string() == "phiD:(1,2,1)");
}

TEST_CASE("classify_pair is symmetric in its arguments") {
  auto g = BlockAssignment({0, 1, 2, 0, 1}, 3);
  const int n = 5;
  for (int a = 0; a < n * (n - 1); ++a) {
    auto [i, j] = DirectedNetwork::dyad_at(a, n);
    for (int b = 0; b < n * (n - 1); ++b) {
      auto [k, l] = DirectedNetwork::dyad_at(b, n);
      auto k1 = classify_pair({i, j}, {k, l}, g);
      auto k2 = classify_pair({k, l}, {i, j}, g);
      CHECK(k1.has_value() == k2.has_value());
      if (k1 && k2) CHECK(*k1 == *k2);
    }
  }
}

TEST_CASE("partition: every ordered pair classified once, totals add up") {
  const int n = 6;
  auto g = BlockAssignment({0, 1, 0, 1, 0, 1}, 2);
  const int nd = n * (n - 1);
  long long buckets[6] = {0, 0, 0, 0, 0, 0};
  for (int a = 0; a < nd; ++a) {
    auto [i, j] = DirectedNetwork::dyad_at(a, n);
    for (int b = 0; b < nd; ++b) {
      auto [k, l] = DirectedNetwork::dyad_at(b, n);
      auto key = classify_pair({i, j}, {k, l}, g);
      ++buckets[key ? static_cast<int>(key->config) : 5];
    }
  }
  const long long ndll = nd;
  CHECK(buckets[0] == ndll);                          // same dyad
  CHECK(buckets[1] == ndll);                          // reciprocal
  CHECK(buckets[2] == static_cast<long long>(n) * (n - 1) * (n - 2));
  CHECK(buckets[3] == static_cast<long long>(n) * (n - 1) * (n - 2));
  // Both mixed orientations land in the phiD bucket.
  CHECK(buckets[4] == 2LL * n * (n - 1) * (n - 2));
  CHECK(buckets[0] + buckets[1] + buckets[2] + buckets[3] + buckets[4] +
            buckets[5] ==
        ndll * ndll);
}

TEST_CASE("enumerate_configurations matches brute-force set sizes") {
  auto g = BlockAssignment({0, 1, 2, 0, 1, 0, 2}, 3);
  auto counts = enumerate_configurations(g);
  auto brute = testutil::naive_moment_sums(random_residuals(7, 3), g);
  CHECK(counts.size() == brute.size());
  for (const auto& [key, sum_count] : brute) {
    REQUIRE(counts.count(key) == 1);
    CHECK(counts.at(key) == sum_count.second);
  }
}

TEST_CASE("enumerate_configurations: distinct key counts for two full blocks") {
  auto g = two_blocks(8);  // both blocks have 4 actors
  auto counts = enumerate_configurations(g);
  int per_config[5] = {0, 0, 0, 0, 0};
  for (const auto& [key, count] : counts) {
    ++per_config[static_cast<int>(key.config)];
    CHECK(count > 0);
  }
  CHECK(per_config[0] == 4);
  CHECK(per_config[1] == 3);
  CHECK(per_config[2] == 6);
  CHECK(per_config[3] == 6);
  CHECK(per_config[4] == 8);

  long long agg[5] = {0, 0, 0, 0, 0};
  for (const auto& [key, count] : counts)
    agg[static_cast<int>(key.config)] += count;
  const long long n = 8;
  CHECK(agg[0] == n * (n - 1));
  CHECK(agg[1] == n * (n - 1));
  CHECK(agg[2] == n * (n - 1) * (n - 2));
  CHECK(agg[3] == n * (n - 1) * (n - 2));
  CHECK(agg[4] == n * (n - 1) * (n - 2));
}

TEST_CASE("enumerate_configurations: single block degenerates to 5 keys") {
  auto counts = enumerate_configurations(BlockAssignment::trivial(6));
  CHECK(counts.size() == 5);
}

TEST_CASE("enumerate_configurations: two-actor blocks lack within-block phiB") {
  auto counts = enumerate_configurations(fig1_blocks());
  CHECK(counts.count(ConfigKey::phi_b(0, 0, 0)) == 0);
  CHECK(counts.count(ConfigKey::phi_c(0, 0, 0)) == 0);
  CHECK(counts.count(ConfigKey::phi_a(0, 0)) == 1);
}

TEST_CASE("config key string forms and parsing") {
  CHECK(ConfigKey::phi_b(0, 1, 0).to_string() == "phiB:(1,{1,2})");
  CHECK(ConfigKey::phi_a(1, 0).to_string() == "phiA:{1,2}");
  CHECK(ConfigKey::phi_d(0, 1, 0).to_string() == "phiD:(1,2,1)");
  for (const char* s : {"sigma2:(2,1)", "phiA:{1,2}", "phiB:(1,{1,2})",
                        "phiC:(2,{1,1})", "phiD:(1,2,1)"}) {
    auto key = ConfigKey::parse(s);
    REQUIRE(key.has_value());
    CHECK(key->to_string() == s);
  }
  CHECK(!ConfigKey::parse("nope:(1,2)").has_value());
}

TEST_CASE("estimate_dc: zero residuals realize to the zero matrix") {
  auto fit = fit_from_residuals(Eigen::VectorXd::Zero(12), 4);
  auto model = estimate_dc(fit);
  CHECK(realize_omega(model).isZero(0.0));
}

TEST_CASE("estimate_dc: canonical entries are residual products") {
  Eigen::VectorXd r(6);
  r << 1, 2, 3, 4, 5, 6;
  auto model = estimate_dc(fit_from_residuals(r, 3));
  auto omega = realize_omega(model);
  // Dyad (2,1) is index 0 and (1,2) is index 2 in 1-based actor labels.
  CHECK(omega(0, 2) == 1.0 * 3.0);
  CHECK(omega(0, 0) == 1.0);
  // Diagonal equals squared residuals.
  for (int i = 0; i < 6; ++i) CHECK(omega(i, i) == r(i) * r(i));
  // (2,1) and (3,2) share nothing... they share actor 2; use n=4 for a
  // genuinely disjoint pair below.
  Eigen::VectorXd r4 = random_residuals(4, 1);
  auto omega4 = realize_omega(estimate_dc(fit_from_residuals(r4, 4)));
  const int a = DirectedNetwork::dyad_index(0, 1, 4);
  const int b = DirectedNetwork::dyad_index(2, 3, 4);
  CHECK(omega4(a, b) == 0.0);
}

TEST_CASE("estimate_exchangeable: constant residuals give constant params") {
  const double c = 1.7;
  auto fit = fit_from_residuals(Eigen::VectorXd::Constant(20, c), 5);
  auto model = estimate_exchangeable(fit);
  CHECK(model.params.size() == 5);
  for (const auto& [key, value] : model.params)
    CHECK(value == doctest::Approx(c * c).epsilon(1e-13));
}

TEST_CASE("estimate_exchangeable: iid residuals give small reciprocal cov") {
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    auto fit = fit_from_residuals(random_residuals(160, seed), 160);
    auto model = estimate_exchangeable(fit);
    CHECK(std::fabs(model.params.at(ConfigKey::phi_a(0, 0))) < 0.05);
  }
}

TEST_CASE("estimate_exchangeable equals estimate_block with one block") {
  auto fit = fit_from_residuals(random_residuals(9, 4), 9);
  auto exch = estimate_exchangeable(fit);
  auto block = estimate_block(fit, BlockAssignment::trivial(9));
  REQUIRE(exch.params.size() == block.params.size());
  for (const auto& [key, value] : exch.params)
    CHECK(value == block.params.at(key));  // bitwise identical path
}

TEST_CASE("estimate_block matches the literal set-enumeration oracle") {
  const int n = 7;
  auto g = BlockAssignment({0, 1, 2, 0, 1, 0, 2}, 3);
  auto r = random_residuals(n, 5);
  auto fast = estimate_block(fit_from_residuals(r, n), g);
  auto naive = testutil::naive_moment_estimates(r, g);
  REQUIRE(fast.params.size() == naive.size());
  for (const auto& [key, value] : naive)
    CHECK(fast.params.at(key) == doctest::Approx(value).epsilon(1e-12));
}

TEST_CASE("collapse identity: block averages reproduce exchangeable exactly") {
  for (int n : {6, 10}) {
    auto g = two_blocks(n);
    auto r = random_residuals(n, static_cast<std::uint64_t>(n));
    auto fit = fit_from_residuals(r, n);
    auto block = estimate_block(fit, g);
    auto exch = estimate_exchangeable(fit);
    for (const auto& [ekey, evalue] : exch.params) {
      double wsum = 0.0, csum = 0.0;
      for (const auto& [bkey, bvalue] : block.params) {
        if (bkey.config != ekey.config) continue;
        const double w = static_cast<double>(block.counts.at(bkey));
        wsum += w * bvalue;
        csum += w;
      }
      CHECK(wsum / csum == doctest::Approx(evalue).epsilon(1e-12));
    }
  }
}

TEST_CASE("collapse weights match the two-block closed form") {
  const int n = 9;  // n1=4, n2=5
  auto g = two_blocks(n);
  const double n1 = 4, n2 = 5;
  auto r = random_residuals(n, 17);
  auto fit = fit_from_residuals(r, n);
  auto block = estimate_block(fit, g);
  auto exch = estimate_exchangeable(fit);
  const double s11 = block.params.at(ConfigKey::sigma2(0, 0));
  const double s12 = block.params.at(ConfigKey::sigma2(0, 1));
  const double s21 = block.params.at(ConfigKey::sigma2(1, 0));
  const double s22 = block.params.at(ConfigKey::sigma2(1, 1));
  const double combined = (n1 * (n1 - 1) * s11 + n2 * (n2 - 1) * s22 +
                           n1 * n2 * (s12 + s21)) /
                          (n * (n - 1));
  CHECK(combined ==
        doctest::Approx(exch.params.at(ConfigKey::sigma2(0, 0))).epsilon(1e-12));

  const double a11 = block.params.at(ConfigKey::phi_a(0, 0));
  const double a12 = block.params.at(ConfigKey::phi_a(0, 1));
  const double a22 = block.params.at(ConfigKey::phi_a(1, 1));
  const double acomb = (n1 * (n1 - 1) * a11 + n2 * (n2 - 1) * a22 +
                        2 * n1 * n2 * a12) /
                       (n * (n - 1));
  CHECK(acomb ==
        doctest::Approx(exch.params.at(ConfigKey::phi_a(0, 0))).epsilon(1e-12));
}

TEST_CASE("within-block relabeling leaves estimates unchanged") {
  const int n = 8;
  auto g = two_blocks(n);
  auto r = random_residuals(n, 23);
  auto base = estimate_block(fit_from_residuals(r, n), g);

  // Swap actors 1 and 3 (same block) and permute the residuals to match.
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::swap(perm[1], perm[3]);
  Eigen::VectorXd rp(r.size());
  for (int idx = 0; idx < r.size(); ++idx) {
    auto [i, j] = DirectedNetwork::dyad_at(idx, n);
    rp(DirectedNetwork::dyad_index(perm[static_cast<std::size_t>(i)],
                                   perm[static_cast<std::size_t>(j)], n)) =
        r(idx);
  }
  auto permuted = estimate_block(fit_from_residuals(rp, n), g);
  for (const auto& [key, value] : base.params)
    CHECK(permuted.params.at(key) == doctest::Approx(value).epsilon(1e-12));
}

TEST_CASE("realize_omega: symmetry, row support, and missing keys") {
  const int n = 6;
  auto g = two_blocks(n);
  auto model = estimate_block(fit_from_residuals(random_residuals(n, 8), n), g);
  auto omega = realize_omega(model);
  CHECK(omega == omega.transpose().eval());
  for (int row = 0; row < omega.rows(); ++row) {
    int nonzero = 0;
    for (int col = 0; col < omega.cols(); ++col)
      if (omega(row, col) != 0.0) ++nonzero;
    CHECK(nonzero == 4 * n - 6);
  }

  auto broken = model;
  broken.params.erase(ConfigKey::sigma2(0, 1));
  CHECK_THROWS_WITH_AS((void)realize_omega(broken),
                       "covariance parameter missing for key sigma2:(1,2)",
                       NumericalError);
}

TEST_CASE("realize_omega: one-block model uses at most 5 distinct values") {
  auto fit = fit_from_residuals(random_residuals(6, 9), 6);
  auto omega = realize_omega(estimate_exchangeable(fit));
  std::set<double> values;
  for (int i = 0; i < omega.rows(); ++i)
    for (int j = 0; j < omega.cols(); ++j)
      if (omega(i, j) != 0.0) values.insert(omega(i, j));
  CHECK(values.size() <= 5);
}

TEST_CASE("sandwich: homoskedastic model reduces to sigma^2 (X^T X)^{-1}") {
  auto net = testutil::random_network(6, 1, 12);
  auto fit = ols_fit(net);
  CovarianceModel model;
  model.kind = CovKind::Exchangeable;
  model.blocks = BlockAssignment::trivial(6);
  model.n = 6;
  const double s2 = 2.25;
  model.params[ConfigKey::sigma2(0, 0)] = s2;
  model.params[ConfigKey::phi_a(0, 0)] = 0.0;
  model.params[ConfigKey::phi_b(0, 0, 0)] = 0.0;
  model.params[ConfigKey::phi_c(0, 0, 0)] = 0.0;
  model.params[ConfigKey::phi_d(0, 0, 0)] = 0.0;
  auto v = sandwich_vcov(fit, model);
  CHECK((v - s2 * fit.xtx_inv).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("sandwich: accumulated path equals the dense-omega oracle") {
  for (int n : {5, 8, 12}) {
    auto net = testutil::random_network(n, 1, static_cast<std::uint64_t>(n) + 40);
    auto fit = ols_fit(net);
    auto g = two_blocks(n);
    const CovarianceModel models[3] = {estimate_dc(fit),
                                       estimate_exchangeable(fit),
                                       estimate_block(fit, g)};
    for (const auto& model : models) {
      const Eigen::MatrixXd dense =
          fit.xtx_inv * fit.design.transpose() * realize_omega(model) *
          fit.design * fit.xtx_inv;
      const Eigen::MatrixXd fast = sandwich_vcov(fit, model);
      CHECK((dense - fast).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }
}

TEST_CASE("sandwich: intercept-only exchangeable matches dense oracle at n=5") {
  Eigen::VectorXd y = random_residuals(5, 77);
  DirectedNetwork net(5, y, Eigen::MatrixXd(20, 0));
  auto fit = ols_fit(net);
  auto model = estimate_exchangeable(fit);
  const Eigen::MatrixXd dense = fit.xtx_inv * fit.design.transpose() *
                                realize_omega(model) * fit.design * fit.xtx_inv;
  auto sw = sandwich(fit, model);
  CHECK(sw.vcov(0, 0) == doctest::Approx(dense(0, 0)).epsilon(1e-10));
  // CI uses the normal critical value.
  CHECK(z_critical(0.05) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(sw.ci_upper(0) - sw.ci_lower(0) ==
        doctest::Approx(2 * 1.959963984540054 * sw.se(0)).epsilon(1e-12));
}

TEST_CASE("sandwich: negative coefficient variance raises") {
  auto net = testutil::random_network(5, 1, 91);
  auto fit = ols_fit(net);
  auto model = estimate_exchangeable(fit);
  for (auto& [key, value] : model.params) value = 0.0;
  model.params.at(ConfigKey::sigma2(0, 0)) = -5.0;
  CHECK_THROWS_WITH_AS((void)sandwich(fit, model),
                       "sandwich produced negative variance", NumericalError);
}

TEST_CASE("theorem_gap: single block gives the exact zero matrix") {
  auto net = testutil::random_network(7, 1, 101);
  auto fit = ols_fit(net);
  auto exch = estimate_exchangeable(fit);
  auto block1 = estimate_block(fit, BlockAssignment::trivial(7));
  CHECK(theorem_gap(fit, block1, exch).isZero(0.0));
}

TEST_SUITE_END();
