#include "netreg/censored.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "netreg/errors.hpp"
#include "netreg/normal.hpp"
#include "netreg/ols.hpp"
#include "netreg/optimize.hpp"
#include "netreg/parallel.hpp"
#include "netreg/rng.hpp"

namespace netreg {

namespace {

// Gauss-Legendre half-nodes and weights for the 6/12/20 point rules.
const double kGlX[3][10] = {
    {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969, 0, 0, 0, 0,
     0, 0, 0},
    {-0.9815606342467192, -0.9041172563704749, -0.7699026741943047,
     -0.5873179542866175, -0.3678314989981802, -0.1252334085114689, 0, 0, 0,
     0},
    {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
     -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
     -0.5108670019508271, -0.3737060887154195, -0.2277858511416451,
     -0.0765265211334973}};
const double kGlW[3][10] = {
    {0.1713244923791704, 0.3607615730481386, 0.4679139345726910, 0, 0, 0, 0, 0,
     0, 0},
    {0.0471753363865118, 0.1069393259953184, 0.1600783285433462,
     0.2031674267230659, 0.2334925365383548, 0.2491470458134028, 0, 0, 0, 0},
    {0.0176140071391521, 0.0406014298003869, 0.0626720483341091,
     0.0832767415767048, 0.1019301198172404, 0.1181945319615184,
     0.1316886384491766, 0.1420961093183820, 0.1491729864726037,
     0.1527533871307258}};

// Upper-orthant probability P(X > dh, Y > dk) for the standard bivariate
// normal; Drezner-Wesolowsky/Genz single-integral form with the
// transformed expansion near |r| = 1.
double bvn_upper(double dh, double dk, double r) {
  constexpr double twopi = 6.283185307179586;
  int ng;
  const double ar = std::fabs(r);
  if (ar < 0.3) ng = 0;
  else if (ar < 0.75) ng = 1;
  else ng = 2;
  const int lg = ng == 0 ? 3 : (ng == 1 ? 6 : 10);

  double h = dh, k = dk;
  double hk = h * k;
  double bvn = 0.0;
  if (ar < 0.925) {
    if (ar > 0.0) {
      const double hs = (h * h + k * k) / 2.0;
      const double asr = std::asin(r);
      for (int i = 0; i < lg; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double sn = std::sin(asr * (is * kGlX[ng][i] + 1.0) / 2.0);
          bvn += kGlW[ng][i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
      }
      bvn *= asr / (2.0 * twopi);
    }
    bvn += norm_cdf(-h) * norm_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (ar < 1.0) {
      const double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 16.0;
      double asr = -(bs / as + hk) / 2.0;
      if (asr > -100.0)
        bvn = a * std::exp(asr) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 +
               c * d * as * as / 5.0);
      if (-hk < 100.0) {
        const double b = std::sqrt(bs);
        bvn -= std::exp(-hk / 2.0) * std::sqrt(twopi) * norm_cdf(-b / a) * b *
               (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a /= 2.0;
      for (int i = 0; i < lg; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          double xs = a * (is * kGlX[ng][i] + 1.0);
          xs = xs * xs;
          const double rs = std::sqrt(1.0 - xs);
          asr = -(bs / xs + hk) / 2.0;
          if (asr > -100.0) {
            bvn += a * kGlW[ng][i] * std::exp(asr) *
                   (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                    (1.0 + c * xs * (1.0 + d * xs)));
          }
        }
      }
      bvn = -bvn / twopi;
    }
    if (r > 0.0) {
      bvn += norm_cdf(-std::max(h, k));
    } else {
      bvn = -bvn;
      if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
    }
  }
  return std::min(1.0, std::max(0.0, bvn));
}

}  // namespace

double bvn_cdf(double h, double k, double rho) {
  if (std::isnan(h) || std::isnan(k) || std::isnan(rho))
    throw NumericalError("bvn_cdf: NaN input");
  if (std::fabs(rho) > 1.0)
    throw ValidationError("bvn_cdf: |rho| must not exceed 1");
  if (std::isinf(h) || std::isinf(k)) {
    if (h < 0 || k < 0) return 0.0;
    if (std::isinf(h) && std::isinf(k)) return 1.0;
    return std::isinf(h) ? norm_cdf(k) : norm_cdf(h);
  }
  if (rho == 1.0) return norm_cdf(std::min(h, k));
  if (rho == -1.0) return std::max(0.0, norm_cdf(h) + norm_cdf(k) - 1.0);
  return bvn_upper(-h, -k, rho);
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kTinyProb = 1e-300;

// Derivatives of the standard bivariate CDF at (h, k, rho).
void bvn_cdf_partials(double h, double k, double rho, double& p, double& dh,
                      double& dk, double& drho) {
  p = bvn_cdf(h, k, rho);
  const double om = 1.0 - rho * rho;
  const double sq = std::sqrt(om);
  dh = norm_pdf(h) * norm_cdf((k - rho * h) / sq);
  dk = norm_pdf(k) * norm_cdf((h - rho * k) / sq);
  drho = std::exp(-(h * h - 2.0 * rho * h * k + k * k) / (2.0 * om)) /
         (2.0 * M_PI * sq);
}

}  // namespace

double censored_loglik1(double mean, double var, double y, bool censored) {
  Eigen::Vector2d g;
  return censored_loglik1_grad(mean, var, y, censored, g);
}

double censored_loglik1_grad(double mean, double var, double y, bool censored,
                             Eigen::Vector2d& grad) {
  const double s = std::sqrt(var);
  if (censored) {
    const double t = -mean / s;
    const double lam = mills_ratio(t);
    grad(0) = -lam / s;
    grad(1) = lam * (-t / (2.0 * var));
    return norm_logcdf(t);
  }
  const double z = (y - mean) / s;
  grad(0) = z / s;
  grad(1) = (z * z - 1.0) / (2.0 * var);
  return -0.5 * (kLog2Pi + std::log(var) + z * z);
}

double pair_loglik_grad(const PairLikelihoodContext& ctx, double y1, double y2,
                        Eigen::Matrix<double, 5, 1>& grad) {
  grad.setZero();
  const double v1 = ctx.var1, v2 = ctx.var2, c = ctx.cov;
  const double s1 = std::sqrt(v1), s2 = std::sqrt(v2);
  const double rho = c / (s1 * s2);
  const double om = 1.0 - rho * rho;
  if (!(om > 1e-12)) return -std::numeric_limits<double>::infinity();

  if (!ctx.censored1 && !ctx.censored2) {
    const double z1 = (y1 - ctx.mean1) / s1;
    const double z2 = (y2 - ctx.mean2) / s2;
    const double q = z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2;
    const double l =
        -kLog2Pi - std::log(s1 * s2) - 0.5 * std::log(om) - q / (2.0 * om);
    const double dmu1 = (z1 - rho * z2) / (s1 * om);
    const double dmu2 = (z2 - rho * z1) / (s2 * om);
    const double ds1 = -1.0 / s1 + z1 * (z1 - rho * z2) / (s1 * om);
    const double ds2 = -1.0 / s2 + z2 * (z2 - rho * z1) / (s2 * om);
    const double drho =
        rho / om + z1 * z2 / om - rho * q / (om * om);
    grad(0) = dmu1;
    grad(1) = dmu2;
    grad(2) = ds1 / (2.0 * s1) + drho * (-rho / (2.0 * v1));
    grad(3) = ds2 / (2.0 * s2) + drho * (-rho / (2.0 * v2));
    grad(4) = drho / (s1 * s2);
    return l;
  }

  if (ctx.censored1 != ctx.censored2) {
    // Orient so index "a" is observed and "b" censored at zero.
    const bool first_observed = ctx.censored2;
    const double ya = first_observed ? y1 : y2;
    const double mua = first_observed ? ctx.mean1 : ctx.mean2;
    const double mub = first_observed ? ctx.mean2 : ctx.mean1;
    const double va = first_observed ? v1 : v2;
    const double vb = first_observed ? v2 : v1;
    const double sa = std::sqrt(va);

    const double za = (ya - mua) / sa;
    const double m = mub + (c / va) * (ya - mua);
    const double w = vb - c * c / va;
    if (!(w > 0.0)) return -std::numeric_limits<double>::infinity();
    const double sw = std::sqrt(w);
    const double t = -m / sw;
    const double lam = mills_ratio(t);
    const double l = -0.5 * (kLog2Pi + std::log(va) + za * za) +
                     norm_logcdf(t);

    // t = -m/sqrt(w); chain through m(mu_a, mu_b, v_a, c) and w(v_a, v_b, c).
    const double dm_dmua = -c / va;
    const double dm_dmub = 1.0;
    const double dm_dva = -c * (ya - mua) / (va * va);
    const double dm_dc = (ya - mua) / va;
    const double dw_dva = c * c / (va * va);
    const double dw_dvb = 1.0;
    const double dw_dc = -2.0 * c / va;
    auto dt = [&](double dm, double dw) {
      return -dm / sw + (m / (2.0 * w * sw)) * dw;
    };
    const double dmua = za / sa + lam * dt(dm_dmua, 0.0);
    const double dmub = lam * dt(dm_dmub, 0.0);
    const double dva =
        (za * za - 1.0) / (2.0 * va) + lam * dt(dm_dva, dw_dva);
    const double dvb = lam * dt(0.0, dw_dvb);
    const double dc = lam * dt(dm_dc, dw_dc);
    if (first_observed) {
      grad(0) = dmua;
      grad(1) = dmub;
      grad(2) = dva;
      grad(3) = dvb;
    } else {
      grad(0) = dmub;
      grad(1) = dmua;
      grad(2) = dvb;
      grad(3) = dva;
    }
    grad(4) = dc;
    return l;
  }

  // Both censored: log of the joint CDF at the origin.
  const double h = -ctx.mean1 / s1;
  const double k = -ctx.mean2 / s2;
  double p, dph, dpk, dprho;
  bvn_cdf_partials(h, k, rho, p, dph, dpk, dprho);
  const double safe_p = std::max(p, kTinyProb);
  const double dh_dmu1 = -1.0 / s1;
  const double dk_dmu2 = -1.0 / s2;
  const double dh_dv1 = -h / (2.0 * v1);
  const double dk_dv2 = -k / (2.0 * v2);
  const double drho_dv1 = -rho / (2.0 * v1);
  const double drho_dv2 = -rho / (2.0 * v2);
  const double drho_dc = 1.0 / (s1 * s2);
  grad(0) = dph * dh_dmu1 / safe_p;
  grad(1) = dpk * dk_dmu2 / safe_p;
  grad(2) = (dph * dh_dv1 + dprho * drho_dv1) / safe_p;
  grad(3) = (dpk * dk_dv2 + dprho * drho_dv2) / safe_p;
  grad(4) = dprho * drho_dc / safe_p;
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(p);
}

double pair_loglik(const PairLikelihoodContext& ctx, double y1, double y2,
                   long* underflow_count) {
  Eigen::Matrix<double, 5, 1> g;
  const double l = pair_loglik_grad(ctx, y1, y2, g);
  if (underflow_count && !std::isfinite(l)) ++(*underflow_count);
  return l;
}

long long SubProblem::n_observations() const {
  long long n = 0;
  for (const auto& pr : pairs) n += pr.second < 0 ? 1 : 2;
  return n;
}

namespace {

struct Candidate {
  int d1, d2;
};

void shuffle_candidates(std::vector<Candidate>& cands, RngStream& rng) {
  for (std::size_t i = cands.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(cands[i - 1], cands[j]);
  }
}

}  // namespace

std::vector<SubProblem> build_subproblems(const DirectedNetwork& net,
                                          const BlockAssignment& g,
                                          std::uint64_t seed) {
  const int n = net.n();
  if (g.n() != n)
    throw ValidationError("block assignment length does not match actors");
  auto didx = [&](int i, int j) { return DirectedNetwork::dyad_index(i, j, n); };

  std::map<ConfigKey, std::vector<Candidate>> cands;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      cands[ConfigKey::sigma2(g[i], g[j])].push_back({didx(i, j), -1});
      if (i < j) {
        // Reciprocal pair: first member carries the (min, max) pattern.
        const auto key = ConfigKey::phi_a(g[i], g[j]);
        int d1 = didx(i, j), d2 = didx(j, i);
        if (g[i] != key.blocks[0]) std::swap(d1, d2);
        cands[key].push_back({d1, d2});
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int k = j + 1; k < n; ++k) {
        if (k == i) continue;
        {
          const auto key = ConfigKey::phi_b(g[i], g[j], g[k]);
          int d1 = didx(i, j), d2 = didx(i, k);
          if (g[j] != key.blocks[1]) std::swap(d1, d2);
          cands[key].push_back({d1, d2});
        }
        {
          const auto key = ConfigKey::phi_c(g[i], g[j], g[k]);
          int d1 = didx(j, i), d2 = didx(k, i);
          if (g[j] != key.blocks[1]) std::swap(d1, d2);
          cands[key].push_back({d1, d2});
        }
      }
      for (int k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        cands[ConfigKey::phi_d(g[i], g[j], g[k])].push_back(
            {didx(i, j), didx(k, i)});
      }
    }
  }

  RngStream rng(seed, RngStream::derive({0x7061697273ULL}));
  for (auto& [key, list] : cands) shuffle_candidates(list, rng);

  std::vector<SubProblem> subs;
  for (const auto& [key, list] : cands) {
    SubProblem s;
    s.key = key;
    s.has_cov = key.config != Config::Sigma2;
    switch (key.config) {
      case Config::Sigma2:
        s.var_keys = {key};
        break;
      case Config::PhiA:
        s.var_keys = {ConfigKey::sigma2(key.blocks[0], key.blocks[1])};
        if (key.blocks[0] != key.blocks[1])
          s.var_keys.push_back(
              ConfigKey::sigma2(key.blocks[1], key.blocks[0]));
        break;
      case Config::PhiB:
        s.var_keys = {ConfigKey::sigma2(key.blocks[0], key.blocks[1])};
        if (key.blocks[1] != key.blocks[2])
          s.var_keys.push_back(
              ConfigKey::sigma2(key.blocks[0], key.blocks[2]));
        break;
      case Config::PhiC:
        s.var_keys = {ConfigKey::sigma2(key.blocks[1], key.blocks[0])};
        if (key.blocks[1] != key.blocks[2])
          s.var_keys.push_back(
              ConfigKey::sigma2(key.blocks[2], key.blocks[0]));
        break;
      case Config::PhiD: {
        const auto first = ConfigKey::sigma2(key.blocks[0], key.blocks[1]);
        const auto second = ConfigKey::sigma2(key.blocks[2], key.blocks[0]);
        s.var_keys = {first};
        if (!(first == second)) s.var_keys.push_back(second);
        break;
      }
    }
    subs.push_back(std::move(s));
  }

  // Greedy round-robin packing over shuffled candidates; every observation
  // lands in at most one subproblem.
  std::vector<char> used(static_cast<std::size_t>(net.num_dyads()), 0);
  std::map<ConfigKey, std::size_t> cursor;
  bool progress = true;
  while (progress) {
    progress = false;
    for (auto& s : subs) {
      auto& list = cands[s.key];
      auto& cur = cursor[s.key];
      while (cur < list.size()) {
        const Candidate cand = list[cur++];
        if (used[static_cast<std::size_t>(cand.d1)]) continue;
        if (cand.d2 >= 0 && used[static_cast<std::size_t>(cand.d2)]) continue;
        used[static_cast<std::size_t>(cand.d1)] = 1;
        if (cand.d2 >= 0) used[static_cast<std::size_t>(cand.d2)] = 1;
        s.pairs.emplace_back(cand.d1, cand.d2);
        const int slot2 = cand.d2 < 0 ? -1 : (s.var_keys.size() == 2 ? 1 : 0);
        s.var_slots.emplace_back(0, slot2);
        progress = true;
        break;
      }
    }
  }
  std::erase_if(subs, [](const SubProblem& s) { return s.pairs.empty(); });
  for (std::size_t i = 0; i < subs.size(); ++i)
    subs[i].index = static_cast<int>(i);
  return subs;
}

namespace {

// Natural parameters of a subproblem: beta..., variance(s)..., covariance.
struct NaturalEval {
  const SubProblem* sub;
  const DirectedNetwork* net;
  const Eigen::MatrixXd* design;
  int p;

  // Log-likelihood and gradient in natural space.
  double eval(const Eigen::VectorXd& theta, Eigen::VectorXd* grad,
              long* underflows = nullptr) const {
    const int nv = static_cast<int>(sub->var_keys.size());
    const Eigen::VectorXd beta = theta.head(p);
    const double va = theta(p);
    const double vb = nv == 2 ? theta(p + 1) : va;
    const double c = sub->has_cov ? theta(p + nv) : 0.0;
    const Eigen::VectorXd& y = net->response();
    double total = 0.0;
    if (grad) grad->setZero();
    Eigen::Matrix<double, 5, 1> g5;
    Eigen::Vector2d g2;
    for (std::size_t t = 0; t < sub->pairs.size(); ++t) {
      const auto [d1, d2] = sub->pairs[t];
      const double mu1 = design->row(d1).dot(beta);
      if (d2 < 0) {
        const bool cens = y(d1) == 0.0;
        const double l = censored_loglik1_grad(mu1, va, y(d1), cens, g2);
        total += l;
        if (grad) {
          grad->head(p) += g2(0) * design->row(d1).transpose();
          (*grad)(p) += g2(1);
        }
        continue;
      }
      const auto [s1, s2] = sub->var_slots[t];
      PairLikelihoodContext ctx;
      ctx.mean1 = mu1;
      ctx.mean2 = design->row(d2).dot(beta);
      ctx.var1 = s1 == 0 ? va : vb;
      ctx.var2 = s2 == 0 ? va : vb;
      ctx.cov = c;
      ctx.censored1 = y(d1) == 0.0;
      ctx.censored2 = y(d2) == 0.0;
      const double l = pair_loglik_grad(ctx, y(d1), y(d2), g5);
      if (!std::isfinite(l)) {
        if (underflows) ++(*underflows);
        total = -std::numeric_limits<double>::infinity();
        return total;
      }
      total += l;
      if (grad) {
        grad->head(p) += g5(0) * design->row(d1).transpose() +
                         g5(1) * design->row(d2).transpose();
        (*grad)(p + (s1 == 0 ? 0 : 1)) += g5(2);
        (*grad)(p + (s2 == 0 ? 0 : 1)) += g5(3);
        (*grad)(p + nv) += g5(4);
      }
    }
    return total;
  }

  // Per-pair score contributions (for the B matrix).
  void accumulate_scores(const Eigen::VectorXd& theta,
                         Eigen::MatrixXd& b_hat) const {
    const int nv = static_cast<int>(sub->var_keys.size());
    const int np = sub->n_params(p);
    const Eigen::VectorXd beta = theta.head(p);
    const double va = theta(p);
    const double vb = nv == 2 ? theta(p + 1) : va;
    const double c = sub->has_cov ? theta(p + nv) : 0.0;
    const Eigen::VectorXd& y = net->response();
    Eigen::VectorXd score(np);
    Eigen::Matrix<double, 5, 1> g5;
    Eigen::Vector2d g2;
    b_hat.setZero(np, np);
    for (std::size_t t = 0; t < sub->pairs.size(); ++t) {
      score.setZero();
      const auto [d1, d2] = sub->pairs[t];
      const double mu1 = design->row(d1).dot(beta);
      if (d2 < 0) {
        censored_loglik1_grad(mu1, va, y(d1), y(d1) == 0.0, g2);
        score.head(p) = g2(0) * design->row(d1).transpose();
        score(p) = g2(1);
      } else {
        const auto [s1, s2] = sub->var_slots[t];
        PairLikelihoodContext ctx;
        ctx.mean1 = mu1;
        ctx.mean2 = design->row(d2).dot(beta);
        ctx.var1 = s1 == 0 ? va : vb;
        ctx.var2 = s2 == 0 ? va : vb;
        ctx.cov = c;
        ctx.censored1 = y(d1) == 0.0;
        ctx.censored2 = y(d2) == 0.0;
        pair_loglik_grad(ctx, y(d1), y(d2), g5);
        score.head(p) = g5(0) * design->row(d1).transpose() +
                        g5(1) * design->row(d2).transpose();
        score(p + (s1 == 0 ? 0 : 1)) += g5(2);
        score(p + (s2 == 0 ? 0 : 1)) += g5(3);
        score(p + nv) = g5(4);
      }
      b_hat += score * score.transpose();
    }
  }
};

}  // namespace

SubProblemFit fit_subproblem(const SubProblem& s, const DirectedNetwork& net,
                             const Eigen::MatrixXd& design,
                             const CensoredFitOptions& opts,
                             const Eigen::VectorXd& beta_init,
                             const std::map<ConfigKey, double>& var_init) {
  const int p = static_cast<int>(design.cols());
  const int nv = static_cast<int>(s.var_keys.size());
  const int np = s.n_params(p);
  NaturalEval eval{&s, &net, &design, p};

  // Optimization space: beta as-is, variances log-shifted above the bound,
  // covariance through a bounded correlation.
  const double vmin = opts.var_min;
  const double rmax = opts.rho_max;
  auto decode = [&](const Eigen::VectorXd& x, Eigen::VectorXd& nat) {
    nat.resize(np);
    nat.head(p) = x.head(p);
    for (int t = 0; t < nv; ++t) nat(p + t) = vmin + std::exp(x(p + t));
    if (s.has_cov) {
      const double va = nat(p);
      const double vb = nv == 2 ? nat(p + 1) : va;
      nat(p + nv) = rmax * std::tanh(x(p + nv)) * std::sqrt(va * vb);
    }
  };

  long underflows = 0;
  Eigen::VectorXd nat(np), ngrad(np);
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    decode(x, nat);
    const double l = eval.eval(nat, grad ? &ngrad : nullptr, &underflows);
    if (!grad) return -l;
    if (!std::isfinite(l)) {
      grad->setZero(np);
      return -l;
    }
    grad->head(p) = ngrad.head(p);
    const double va = nat(p);
    const double vb = nv == 2 ? nat(p + 1) : va;
    double dc_dva = 0.0, dc_dvb = 0.0;
    if (s.has_cov) {
      const double c = nat(p + nv);
      if (nv == 2) {
        dc_dva = c / (2.0 * va);
        dc_dvb = c / (2.0 * vb);
      } else {
        dc_dva = c / va;
      }
    }
    const double gc = s.has_cov ? ngrad(p + nv) : 0.0;
    (*grad)(p) = (ngrad(p) + gc * dc_dva) * (va - vmin);
    if (nv == 2) (*grad)(p + 1) = (ngrad(p + 1) + gc * dc_dvb) * (vb - vmin);
    if (s.has_cov) {
      const double th = std::tanh(x(p + nv));
      (*grad)(p + nv) = gc * std::sqrt(va * vb) * rmax * (1.0 - th * th);
    }
    *grad = -*grad;
    return -l;
  };

  Eigen::VectorXd x0(np);
  x0.head(p) = beta_init;
  for (int t = 0; t < nv; ++t) {
    auto it = var_init.find(s.var_keys[static_cast<std::size_t>(t)]);
    double v0 = it != var_init.end() ? it->second : 1.0;
    v0 = std::max(v0, vmin * 1.5);
    x0(p + t) = std::log(v0 - vmin);
  }
  if (s.has_cov) x0(p + nv) = 0.0;

  OptimResult opt =
      bfgs_minimize(objective, x0, opts.max_iterations, opts.grad_tol);

  SubProblemFit fit;
  decode(opt.x, fit.theta);
  fit.loglik = -opt.f;
  fit.converged = opt.converged;
  fit.iterations = opt.iterations;
  fit.underflows = underflows;

  // Information matrices in natural space: A from central differences of the
  // analytic gradient, B from per-pair score outer products.
  Eigen::MatrixXd hess(np, np);
  Eigen::VectorXd gp(np), gm(np), probe;
  for (int j = 0; j < np; ++j) {
    const double hstep = 1e-5 * std::max(1.0, std::fabs(fit.theta(j)));
    probe = fit.theta;
    probe(j) += hstep;
    eval.eval(probe, &gp);
    probe(j) -= 2.0 * hstep;
    eval.eval(probe, &gm);
    hess.col(j) = (gp - gm) / (2.0 * hstep);
  }
  fit.a_hat = -hess;
  eval.accumulate_scores(fit.theta, fit.b_hat);

  const Eigen::MatrixXd a_sym = 0.5 * (fit.a_hat + fit.a_hat.transpose());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a_sym);
  if (!lu.isInvertible())
    throw NumericalError("singular information matrix in subproblem " +
                         s.key.to_string());
  const Eigen::MatrixXd a_inv = lu.inverse();
  fit.sigma = a_inv * fit.b_hat * a_inv.transpose();
  return fit;
}

CombinedEstimate combine_estimates(const std::vector<SubProblem>& subs,
                                   const std::vector<SubProblemFit>& fits,
                                   int p) {
  if (subs.size() != fits.size() || subs.empty())
    throw ValidationError("combine_estimates needs one fit per subproblem");

  std::vector<ConfigKey> param_keys;
  for (const auto& s : subs) {
    for (const auto& vk : s.var_keys) param_keys.push_back(vk);
    if (s.has_cov) param_keys.push_back(s.key);
  }
  std::sort(param_keys.begin(), param_keys.end());
  param_keys.erase(std::unique(param_keys.begin(), param_keys.end()),
                   param_keys.end());

  CombinedEstimate out;
  for (int j = 0; j < p; ++j) out.names.push_back("beta" + std::to_string(j));
  for (const auto& k : param_keys) out.names.push_back(k.to_string());
  const int g_dim = static_cast<int>(out.names.size());

  std::vector<int> offsets;
  int total = 0;
  for (const auto& s : subs) {
    offsets.push_back(total);
    total += s.n_params(p);
  }

  out.weights = Eigen::MatrixXd::Zero(g_dim, total);
  auto key_row = [&](const ConfigKey& k) {
    const auto it = std::lower_bound(param_keys.begin(), param_keys.end(), k);
    return p + static_cast<int>(it - param_keys.begin());
  };
  for (std::size_t si = 0; si < subs.size(); ++si) {
    const auto& s = subs[si];
    const double w = static_cast<double>(s.n_observations());
    const int off = offsets[si];
    for (int j = 0; j < p; ++j) out.weights(j, off + j) = w;
    for (std::size_t t = 0; t < s.var_keys.size(); ++t)
      out.weights(key_row(s.var_keys[t]), off + p + static_cast<int>(t)) += w;
    if (s.has_cov)
      out.weights(key_row(s.key),
                  off + p + static_cast<int>(s.var_keys.size())) = w;
  }
  for (int r = 0; r < g_dim; ++r) {
    const double rowsum = out.weights.row(r).sum();
    if (rowsum <= 0.0)
      throw NumericalError("combined parameter " + out.names[static_cast<std::size_t>(r)] +
                           " has no contributing subproblem");
    out.weights.row(r) /= rowsum;
    // Force the row sum to exactly one.
    int arg_max = 0;
    out.weights.row(r).maxCoeff(&arg_max);
    out.weights(r, arg_max) += 1.0 - out.weights.row(r).sum();
  }

  Eigen::VectorXd stacked(total);
  Eigen::MatrixXd stacked_cov = Eigen::MatrixXd::Zero(total, total);
  for (std::size_t si = 0; si < subs.size(); ++si) {
    const int off = offsets[si];
    const int np = subs[si].n_params(p);
    stacked.segment(off, np) = fits[si].theta;
    stacked_cov.block(off, off, np, np) = fits[si].sigma;
  }
  out.theta = out.weights * stacked;
  out.vcov = out.weights * stacked_cov * out.weights.transpose();
  return out;
}

CensoredFitResult censored_fit(const DirectedNetwork& net,
                               const BlockAssignment& g,
                               const CensoredFitOptions& opts) {
  const Eigen::VectorXd& y = net.response();
  const int nd = net.num_dyads();
  int n_censored = 0;
  for (int i = 0; i < nd; ++i)
    if (y(i) == 0.0) ++n_censored;
  if (n_censored == nd)
    throw ValidationError("all responses are censored at zero");

  auto [design, yy] = build_design_matrix(net);
  const int p = static_cast<int>(design.cols());

  // Initialize from OLS on the positive observations.
  const int n_pos = nd - n_censored;
  if (n_pos < p + 1)
    throw ValidationError("too few positive observations to initialize");
  Eigen::MatrixXd x_pos(n_pos, p);
  Eigen::VectorXd y_pos(n_pos);
  int t = 0;
  for (int i = 0; i < nd; ++i) {
    if (y(i) == 0.0) continue;
    x_pos.row(t) = design.row(i);
    y_pos(t) = y(i);
    ++t;
  }
  const Eigen::VectorXd beta0 =
      x_pos.colPivHouseholderQr().solve(y_pos);
  const double resid_var =
      (y_pos - x_pos * beta0).squaredNorm() / std::max(1, n_pos - p);
  std::map<ConfigKey, double> var_init;
  for (int u = 0; u < g.num_blocks; ++u)
    for (int v = 0; v < g.num_blocks; ++v)
      var_init[ConfigKey::sigma2(u, v)] = std::max(resid_var, opts.var_min * 2);

  auto subs = build_subproblems(net, g, opts.seed);
  CensoredFitResult res;
  res.censored_fraction = static_cast<double>(n_censored) / nd;

  std::vector<SubProblem> kept;
  for (auto& s : subs) {
    SubproblemDiagnostics d;
    d.key = s.key;
    d.pairs = static_cast<long long>(s.pairs.size());
    d.observations = s.n_observations();
    if (d.pairs < opts.min_pairs) {
      d.dropped = true;
      res.warnings.push_back("subproblem " + s.key.to_string() +
                             " dropped: only " + std::to_string(d.pairs) +
                             " pairs (minimum " +
                             std::to_string(opts.min_pairs) + ")");
      res.diagnostics.push_back(d);
      continue;
    }
    res.diagnostics.push_back(d);
    kept.push_back(std::move(s));
  }
  if (kept.empty())
    throw NumericalError("no subproblem has enough pairs to fit");

  std::vector<SubProblemFit> fits(kept.size());
  std::vector<std::string> errors(kept.size());
  parallel_for(kept.size(), opts.n_threads, [&](std::size_t i) {
    try {
      fits[i] = fit_subproblem(kept[i], net, design, opts, beta0, var_init);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& err : errors)
    if (!err.empty()) throw NumericalError(err);

  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (auto& d : res.diagnostics) {
      if (d.key == kept[i].key && !d.dropped) {
        d.converged = fits[i].converged;
        d.iterations = fits[i].iterations;
        d.loglik = fits[i].loglik;
        d.underflows = fits[i].underflows;
        if (!d.converged)
          res.warnings.push_back("subproblem " + d.key.to_string() +
                                 " did not converge; using last iterate");
      }
    }
  }

  CombinedEstimate comb = combine_estimates(kept, fits, p);
  res.beta_hat = comb.theta.head(p);
  res.vcov_beta = comb.vcov.topLeftCorner(p, p);
  res.se.resize(p);
  res.ci_lower.resize(p);
  res.ci_upper.resize(p);
  const double z = z_critical(opts.alpha);
  for (int j = 0; j < p; ++j) {
    const double v = comb.vcov(j, j);
    if (v < 0.0)
      throw NumericalError("combined estimator produced negative variance");
    res.se(j) = std::sqrt(v);
    res.ci_lower(j) = res.beta_hat(j) - z * res.se(j);
    res.ci_upper(j) = res.beta_hat(j) + z * res.se(j);
  }
  for (std::size_t r = static_cast<std::size_t>(p); r < comb.names.size(); ++r) {
    auto key = ConfigKey::parse(comb.names[r]);
    if (key) res.cov_params[*key] = comb.theta(static_cast<Eigen::Index>(r));
  }
  return res;
}

}  // namespace netreg
