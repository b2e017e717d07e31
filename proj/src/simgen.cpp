#include "netreg/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "netreg/errors.hpp"

namespace netreg {

void ErrorModelParams::validate() const {
  const auto b = static_cast<std::size_t>(num_blocks);
  if (num_blocks < 1) throw ValidationError("error model needs >= 1 block");
  if (sigma_a.size() != b || sigma_b.size() != b || sigma_z.size() != b)
    throw ValidationError("error model SD vectors must have one entry per block");
  if (sigma_gamma.rows() != num_blocks || sigma_gamma.cols() != num_blocks)
    throw ValidationError("sigma_gamma must be B x B");
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  for (double v : sigma_a)
    if (!positive(v)) throw ValidationError("sigma_a must be positive");
  for (double v : sigma_b)
    if (!positive(v)) throw ValidationError("sigma_b must be positive");
  for (double v : sigma_z)
    if (!positive(v)) throw ValidationError("sigma_z must be positive");
  for (int u = 0; u < num_blocks; ++u)
    for (int v = 0; v < num_blocks; ++v) {
      if (!positive(sigma_gamma(u, v)))
        throw ValidationError("sigma_gamma must be positive");
      if (sigma_gamma(u, v) != sigma_gamma(v, u))
        throw ValidationError("sigma_gamma must be symmetric");
    }
  if (!positive(sigma_eps)) throw ValidationError("sigma_eps must be positive");
  if (!(std::fabs(rho_ab) < 1.0))
    throw ValidationError("|rho_ab| must be below 1");
  if (latent_dim < 1) throw ValidationError("latent dimension must be >= 1");
}

ErrorModelParams ErrorModelParams::from_r_alpha(double r, double alpha1) {
  if (!(r > 0.0 && r <= 1.0))
    throw ValidationError("block strength r must be in (0,1]");
  if (!(alpha1 > 0.0)) throw ValidationError("alpha1 must be positive");
  ErrorModelParams p;
  p.num_blocks = 2;
  const double sqrt2 = std::sqrt(2.0);
  p.sigma_a = {sqrt2 * alpha1, sqrt2 * r * alpha1};
  p.sigma_b = {alpha1, r * alpha1};
  p.sigma_z = {alpha1, r * alpha1};
  p.sigma_gamma.resize(2, 2);
  p.sigma_gamma << alpha1, std::sqrt(r) * alpha1, std::sqrt(r) * alpha1,
      r * alpha1;
  p.rho_ab = 0.5;
  p.latent_dim = 2;
  p.sigma_eps = alpha1;
  return p;
}

void CovariateSpec::validate(int num_blocks) const {
  const auto b = static_cast<std::size_t>(num_blocks);
  switch (family) {
    case CovariateFamily::BinaryMatch:
      if (match_prob.size() != b)
        throw ValidationError("match_prob needs one entry per block");
      for (double p : match_prob)
        if (!(p > 0.0 && p <= 1.0))
          throw ValidationError("match probabilities must be in (0,1]");
      break;
    case CovariateFamily::AbsDiff:
      if (actor_sd.size() != b)
        throw ValidationError("actor_sd needs one entry per block");
      for (double s : actor_sd)
        if (!(s > 0.0)) throw ValidationError("actor SDs must be positive");
      break;
    case CovariateFamily::PairwiseNormal:
      if (pair_sd.rows() != num_blocks || pair_sd.cols() != num_blocks)
        throw ValidationError("pair_sd must be B x B");
      if (pair_sd.minCoeff() <= 0.0)
        throw ValidationError("pair SDs must be positive");
      break;
  }
}

CovariateSpec make_covariate_spec(CovariateFamily family,
                                  CovariateSetting setting, double scale,
                                  int num_blocks) {
  if (num_blocks != 2 && setting != CovariateSetting::Independent)
    throw ValidationError("block-linked covariate settings assume two blocks");
  CovariateSpec spec;
  spec.family = family;
  spec.setting = setting;
  // Block 1 carries the larger error scales, so HighHigh gives block 1 the
  // larger covariate dispersion. Dispersions differ by a 2:1 ratio.
  double c1 = 1.0, c2 = 1.0;
  if (setting == CovariateSetting::HighHigh) c1 = 2.0;
  if (setting == CovariateSetting::HighLow) c2 = 2.0;
  switch (family) {
    case CovariateFamily::BinaryMatch: {
      // Probabilities above 1/2; the closer to 1/2 the larger Var(X), so the
      // high-dispersion block gets the smaller offset.
      spec.match_prob.assign(static_cast<std::size_t>(num_blocks),
                             0.5 + scale);
      if (num_blocks == 2) {
        spec.match_prob[0] = 0.5 + scale * (c1 > c2 ? 1.0 : 2.0);
        spec.match_prob[1] = 0.5 + scale * (c2 > c1 ? 1.0 : 2.0);
        if (setting == CovariateSetting::Independent)
          spec.match_prob[0] = spec.match_prob[1] = 0.5 + scale;
      }
      break;
    }
    case CovariateFamily::AbsDiff: {
      spec.actor_sd.assign(static_cast<std::size_t>(num_blocks), scale);
      if (num_blocks == 2) {
        spec.actor_sd[0] = scale * c1;
        spec.actor_sd[1] = scale * c2;
      }
      break;
    }
    case CovariateFamily::PairwiseNormal: {
      spec.pair_sd = Eigen::MatrixXd::Constant(num_blocks, num_blocks, scale);
      if (num_blocks == 2) {
        spec.pair_sd(0, 0) = scale * c1;
        spec.pair_sd(1, 1) = scale * c2;
        const double cross = scale * std::sqrt(c1 * c2);
        spec.pair_sd(0, 1) = spec.pair_sd(1, 0) = cross;
      }
      break;
    }
  }
  return spec;
}

CovarianceModel true_covariance(const ErrorModelParams& params,
                                const BlockAssignment& g) {
  params.validate();
  if (params.num_blocks != g.num_blocks)
    throw ValidationError("error model block count does not match assignment");
  CovarianceModel m;
  m.kind = g.num_blocks == 1 ? CovKind::Exchangeable
                             : CovKind::BlockExchangeable;
  m.blocks = g;
  m.n = g.n();
  m.counts = enumerate_configurations(g);
  const double d = params.latent_dim;
  auto sa = [&](int b) { return params.sigma_a[static_cast<std::size_t>(b)]; };
  auto sb = [&](int b) { return params.sigma_b[static_cast<std::size_t>(b)]; };
  auto sz = [&](int b) { return params.sigma_z[static_cast<std::size_t>(b)]; };
  for (const auto& [key, count] : m.counts) {
    const int u = key.blocks[0], v = key.blocks[1], w = key.blocks[2];
    double value = 0.0;
    switch (key.config) {
      case Config::Sigma2:
        value = sa(u) * sa(u) + sb(v) * sb(v) +
                d * sz(u) * sz(u) * sz(v) * sz(v) +
                params.sigma_gamma(u, v) * params.sigma_gamma(u, v) +
                params.sigma_eps * params.sigma_eps;
        break;
      case Config::PhiA:
        value = params.rho_ab * (sa(u) * sb(u) + sa(v) * sb(v)) +
                d * sz(u) * sz(u) * sz(v) * sz(v) +
                params.sigma_gamma(u, v) * params.sigma_gamma(u, v);
        break;
      case Config::PhiB:
        value = sa(u) * sa(u);
        break;
      case Config::PhiC:
        value = sb(u) * sb(u);
        break;
      case Config::PhiD:
        value = params.rho_ab * sa(u) * sb(u);
        break;
    }
    (void)w;
    m.params[key] = value;
  }
  return m;
}

Eigen::VectorXd sample_errors(const ErrorModelParams& params,
                              const BlockAssignment& g, RngStream& rng) {
  params.validate();
  const int n = g.n();
  const int d = params.latent_dim;
  Eigen::VectorXd a(n), b(n);
  Eigen::MatrixXd z(n, d);
  const double rho = params.rho_ab;
  const double rc = std::sqrt(1.0 - rho * rho);
  for (int i = 0; i < n; ++i) {
    const int gi = g[i];
    const double u1 = rng.normal();
    const double u2 = rng.normal();
    a(i) = params.sigma_a[static_cast<std::size_t>(gi)] * u1;
    b(i) = params.sigma_b[static_cast<std::size_t>(gi)] * (rho * u1 + rc * u2);
    for (int k = 0; k < d; ++k)
      z(i, k) = params.sigma_z[static_cast<std::size_t>(gi)] * rng.normal();
  }
  // Symmetric dyad effect, one draw per unordered pair.
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      gamma(i, j) = gamma(j, i) =
          params.sigma_gamma(g[i], g[j]) * rng.normal();

  const int nd = n * (n - 1);
  Eigen::VectorXd xi(nd);
  for (int idx = 0; idx < nd; ++idx) {
    auto [i, j] = DirectedNetwork::dyad_at(idx, n);
    xi(idx) = a(i) + b(j) + z.row(i).dot(z.row(j)) + gamma(i, j) +
              params.sigma_eps * rng.normal();
  }
  return xi;
}

Eigen::VectorXd sample_covariates(const CovariateSpec& spec,
                                  const BlockAssignment& g, RngStream& rng) {
  const int n = g.n();
  spec.validate(g.num_blocks);
  const int nd = n * (n - 1);
  Eigen::VectorXd x(nd);
  switch (spec.family) {
    case CovariateFamily::BinaryMatch: {
      std::vector<int> attr(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        attr[static_cast<std::size_t>(i)] =
            rng.uniform() < spec.match_prob[static_cast<std::size_t>(g[i])]
                ? 1
                : 0;
      for (int idx = 0; idx < nd; ++idx) {
        auto [i, j] = DirectedNetwork::dyad_at(idx, n);
        x(idx) = attr[static_cast<std::size_t>(i)] ==
                         attr[static_cast<std::size_t>(j)]
                     ? 1.0
                     : 0.0;
      }
      break;
    }
    case CovariateFamily::AbsDiff: {
      Eigen::VectorXd attr(n);
      for (int i = 0; i < n; ++i)
        attr(i) = spec.actor_sd[static_cast<std::size_t>(g[i])] * rng.normal();
      for (int idx = 0; idx < nd; ++idx) {
        auto [i, j] = DirectedNetwork::dyad_at(idx, n);
        x(idx) = std::fabs(attr(i) - attr(j));
      }
      break;
    }
    case CovariateFamily::PairwiseNormal: {
      for (int idx = 0; idx < nd; ++idx) {
        auto [i, j] = DirectedNetwork::dyad_at(idx, n);
        x(idx) = spec.pair_sd(g[i], g[j]) * rng.normal();
      }
      break;
    }
  }
  return x;
}

double covariate_variance(const CovariateSpec& spec, int u, int v) {
  switch (spec.family) {
    case CovariateFamily::BinaryMatch: {
      const double pu = spec.match_prob[static_cast<std::size_t>(u)];
      const double pv = spec.match_prob[static_cast<std::size_t>(v)];
      const double match = pu * pv + (1.0 - pu) * (1.0 - pv);
      return match * (1.0 - match);
    }
    case CovariateFamily::AbsDiff: {
      const double au = spec.actor_sd[static_cast<std::size_t>(u)];
      const double av = spec.actor_sd[static_cast<std::size_t>(v)];
      return (au * au + av * av) * (1.0 - 2.0 / M_PI);
    }
    case CovariateFamily::PairwiseNormal:
      return spec.pair_sd(u, v) * spec.pair_sd(u, v);
  }
  return 0.0;
}

namespace {

double error_variance(const ErrorModelParams& params, int u, int v) {
  const double d = params.latent_dim;
  const double sa = params.sigma_a[static_cast<std::size_t>(u)];
  const double sb = params.sigma_b[static_cast<std::size_t>(v)];
  const double szu = params.sigma_z[static_cast<std::size_t>(u)];
  const double szv = params.sigma_z[static_cast<std::size_t>(v)];
  return sa * sa + sb * sb + d * szu * szu * szv * szv +
         params.sigma_gamma(u, v) * params.sigma_gamma(u, v) +
         params.sigma_eps * params.sigma_eps;
}

}  // namespace

double mean_nts(const CovariateSpec& spec, const ErrorModelParams& params,
                double beta1) {
  if (params.num_blocks != 2)
    throw ValidationError("NTS calibration assumes two blocks");
  double total = 0.0;
  for (int u = 0; u < 2; ++u)
    for (int v = 0; v < 2; ++v) {
      const double s2 = error_variance(params, u, v);
      total += s2 / (s2 + beta1 * beta1 * covariate_variance(spec, u, v));
    }
  return total / 4.0;
}

CovariateSpec calibrate_nts(CovariateFamily family, CovariateSetting setting,
                            const ErrorModelParams& params, double beta1,
                            double target) {
  if (!(target > 0.0 && target < 1.0))
    throw ValidationError("NTS target must be in (0,1)");
  params.validate();
  const bool bounded = family == CovariateFamily::BinaryMatch;
  // BinaryMatch scale is a probability offset with a hard ceiling; the other
  // families scale an SD and are unbounded above.
  double lo = 1e-9;
  double hi = bounded
                  ? (setting == CovariateSetting::Independent ? 0.4999 : 0.2499)
                  : 1.0;
  auto value = [&](double t) {
    return mean_nts(make_covariate_spec(family, setting, t, params.num_blocks),
                    params, beta1) - target;
  };
  if (!bounded) {
    int guard = 0;
    while (value(hi) > 0.0 && guard++ < 200) hi *= 2.0;
  }
  double flo = value(lo), fhi = value(hi);
  if (std::isnan(flo) || std::isnan(fhi) || flo * fhi > 0.0)
    throw NumericalError("NTS calibration found no root in bracket");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = value(mid);
    if (std::fabs(fmid) < 1e-8) return make_covariate_spec(family, setting, mid,
                                                           params.num_blocks);
    if ((flo < 0.0) == (fmid < 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return make_covariate_spec(family, setting, 0.5 * (lo + hi),
                             params.num_blocks);
}

BlockAssignment equal_blocks(int n) {
  std::vector<int> g(static_cast<std::size_t>(n), 1);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) g[static_cast<std::size_t>(i)] = 0;
  return BlockAssignment(std::move(g), 2);
}

BlockAssignment shuffled_equal_blocks(int n, RngStream& rng) {
  auto base = equal_blocks(n);
  std::vector<int> g = base.labels;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_index(i + 1));
    std::swap(g[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(j)]);
  }
  return BlockAssignment(std::move(g), 2);
}

SimulatedNetwork generate_network(const BlockAssignment& g,
                                  const Eigen::VectorXd& beta,
                                  const CovariateSpec& spec,
                                  const ErrorModelParams& params,
                                  std::uint64_t seed, bool censor) {
  if (beta.size() != 2)
    throw ValidationError("generator expects beta of length 2");
  const int n = g.n();
  RngStream cov_rng(seed, RngStream::derive({0x636f76ULL}));
  RngStream err_rng(seed, RngStream::derive({0x657272ULL}));
  Eigen::VectorXd x = sample_covariates(spec, g, cov_rng);
  Eigen::VectorXd xi = sample_errors(params, g, err_rng);
  Eigen::VectorXd y_star = beta(0) + (beta(1) * x.array() + xi.array());

  Eigen::VectorXd y = y_star;
  std::vector<bool> censored;
  if (censor) {
    censored.assign(static_cast<std::size_t>(y.size()), false);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y(i) < 0.0) {
        y(i) = 0.0;
        censored[static_cast<std::size_t>(i)] = true;
      }
    }
  }
  Eigen::MatrixXd covs(x.size(), 1);
  covs.col(0) = x;
  return SimulatedNetwork{
      DirectedNetwork(n, std::move(y), std::move(covs)), g, std::move(xi),
      std::move(y_star), std::move(censored), true_covariance(params, g)};
}

SimulatedNetwork generate_network(int n, const Eigen::VectorXd& beta,
                                  const CovariateSpec& spec,
                                  const ErrorModelParams& params,
                                  std::uint64_t seed, bool censor) {
  return generate_network(equal_blocks(n), beta, spec, params, seed, censor);
}

}  // namespace netreg
