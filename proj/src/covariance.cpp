#include "netreg/covariance.hpp"

#include <cmath>

#include "netreg/errors.hpp"
#include "netreg/normal.hpp"

namespace netreg {

namespace {

// Per-actor residual sums split by partner block, the workhorse behind the
// O(n^2) moment estimator.
struct ResidualSums {
  // [actor][block]
  std::vector<std::vector<double>> sent, recv, recip, sent_sq, recv_sq;

  ResidualSums(const Eigen::VectorXd& r, const BlockAssignment& g, int n) {
    const int B = g.num_blocks;
    auto zeros = std::vector<std::vector<double>>(
        static_cast<std::size_t>(n),
        std::vector<double>(static_cast<std::size_t>(B), 0.0));
    sent = recv = recip = sent_sq = recv_sq = zeros;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double rij = r(DirectedNetwork::dyad_index(i, j, n));
        const double rji = r(DirectedNetwork::dyad_index(j, i, n));
        const auto b = static_cast<std::size_t>(g[j]);
        const auto a = static_cast<std::size_t>(i);
        sent[a][b] += rij;
        recv[a][b] += rji;
        recip[a][b] += rij * rji;
        sent_sq[a][b] += rij * rij;
        recv_sq[a][b] += rji * rji;
      }
    }
  }
};

std::vector<std::vector<int>> actors_by_block(const BlockAssignment& g) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(g.num_blocks));
  for (int i = 0; i < g.n(); ++i)
    out[static_cast<std::size_t>(g[i])].push_back(i);
  return out;
}

}  // namespace

CovarianceModel estimate_dc(const RegressionFit& fit) {
  CovarianceModel m;
  m.kind = CovKind::DyadicClustering;
  m.residuals = fit.residuals;
  m.n = fit.n;
  return m;
}

CovarianceModel estimate_block(const RegressionFit& fit,
                               const BlockAssignment& g) {
  const int n = fit.n;
  if (g.n() != n)
    throw ValidationError("block assignment length does not match actors");
  const int B = g.num_blocks;
  const ResidualSums acc(fit.residuals, g, n);
  const auto members = actors_by_block(g);

  CovarianceModel m;
  m.kind = B == 1 ? CovKind::Exchangeable : CovKind::BlockExchangeable;
  m.blocks = g;
  m.n = n;
  m.counts = enumerate_configurations(g);

  std::map<ConfigKey, double> sums;
  for (int u = 0; u < B; ++u) {
    for (int v = 0; v < B; ++v) {
      double s2 = 0, pa = 0;
      for (int i : members[static_cast<std::size_t>(u)]) {
        s2 += acc.sent_sq[static_cast<std::size_t>(i)][static_cast<std::size_t>(v)];
        pa += acc.recip[static_cast<std::size_t>(i)][static_cast<std::size_t>(v)];
      }
      sums[ConfigKey::sigma2(u, v)] = s2;
      sums[ConfigKey::phi_a(u, v)] += pa;
      for (int w = v; w < B; ++w) {
        double pb = 0, pc = 0;
        for (int i : members[static_cast<std::size_t>(u)]) {
          const auto a = static_cast<std::size_t>(i);
          const auto bv = static_cast<std::size_t>(v);
          const auto bw = static_cast<std::size_t>(w);
          if (v == w) {
            pb += acc.sent[a][bv] * acc.sent[a][bv] - acc.sent_sq[a][bv];
            pc += acc.recv[a][bv] * acc.recv[a][bv] - acc.recv_sq[a][bv];
          } else {
            pb += 2.0 * acc.sent[a][bv] * acc.sent[a][bw];
            pc += 2.0 * acc.recv[a][bv] * acc.recv[a][bw];
          }
        }
        sums[ConfigKey::phi_b(u, v, w)] = pb;
        sums[ConfigKey::phi_c(u, v, w)] = pc;
      }
      for (int w = 0; w < B; ++w) {
        double pd = 0;
        for (int i : members[static_cast<std::size_t>(u)]) {
          const auto a = static_cast<std::size_t>(i);
          pd += acc.sent[a][static_cast<std::size_t>(v)] *
                acc.recv[a][static_cast<std::size_t>(w)];
          if (v == w) pd -= acc.recip[a][static_cast<std::size_t>(v)];
        }
        sums[ConfigKey::phi_d(u, v, w)] = pd;
      }
    }
  }
  for (const auto& [key, count] : m.counts)
    m.params[key] = sums.at(key) / static_cast<double>(count);
  return m;
}

CovarianceModel estimate_exchangeable(const RegressionFit& fit) {
  return estimate_block(fit, BlockAssignment::trivial(fit.n));
}

Eigen::MatrixXd realize_omega(const CovarianceModel& model) {
  const int n = model.n;
  const int nd = n * (n - 1);
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(nd, nd);

  if (model.kind == CovKind::DyadicClustering) {
    const Eigen::VectorXd& r = model.residuals;
    const BlockAssignment g = BlockAssignment::trivial(n);
    for (int a = 0; a < nd; ++a) {
      auto [i, j] = DirectedNetwork::dyad_at(a, n);
      for (int b = a; b < nd; ++b) {
        auto [k, l] = DirectedNetwork::dyad_at(b, n);
        if (classify_pair({i, j}, {k, l}, g)) {
          omega(a, b) = r(a) * r(b);
          omega(b, a) = omega(a, b);
        }
      }
    }
    return omega;
  }

  if (!model.blocks)
    throw ValidationError("parameterized covariance model lacks blocks");
  const BlockAssignment& g = *model.blocks;
  for (int a = 0; a < nd; ++a) {
    auto [i, j] = DirectedNetwork::dyad_at(a, n);
    for (int b = a; b < nd; ++b) {
      auto [k, l] = DirectedNetwork::dyad_at(b, n);
      auto key = classify_pair({i, j}, {k, l}, g);
      if (!key) continue;
      auto it = model.params.find(*key);
      if (it == model.params.end())
        throw NumericalError("covariance parameter missing for key " +
                             key->to_string());
      omega(a, b) = it->second;
      omega(b, a) = omega(a, b);
    }
  }
  return omega;
}

SandwichParts::SandwichParts(const Eigen::MatrixXd& X,
                             const BlockAssignment& g) {
  const int n = g.n();
  const int B = g.num_blocks;
  const auto p = X.cols();
  const auto members = actors_by_block(g);

  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;
  // Per-actor, per-partner-block covariate sums.
  std::vector<std::vector<Vec>> as(static_cast<std::size_t>(n)),
      ar(static_cast<std::size_t>(n));
  std::vector<std::vector<Mat>> cs(static_cast<std::size_t>(n)),
      cr(static_cast<std::size_t>(n)), cx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto a = static_cast<std::size_t>(i);
    as[a].assign(static_cast<std::size_t>(B), Vec::Zero(p));
    ar[a].assign(static_cast<std::size_t>(B), Vec::Zero(p));
    cs[a].assign(static_cast<std::size_t>(B), Mat::Zero(p, p));
    cr[a].assign(static_cast<std::size_t>(B), Mat::Zero(p, p));
    cx[a].assign(static_cast<std::size_t>(B), Mat::Zero(p, p));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto a = static_cast<std::size_t>(i);
      const auto b = static_cast<std::size_t>(g[j]);
      const Vec xij = X.row(DirectedNetwork::dyad_index(i, j, n)).transpose();
      const Vec xji = X.row(DirectedNetwork::dyad_index(j, i, n)).transpose();
      as[a][b] += xij;
      ar[a][b] += xji;
      cs[a][b] += xij * xij.transpose();
      cr[a][b] += xji * xji.transpose();
      cx[a][b] += xij * xji.transpose();
    }
  }

  const auto counts = enumerate_configurations(g);
  for (int u = 0; u < B; ++u) {
    const auto& blk = members[static_cast<std::size_t>(u)];
    for (int v = 0; v < B; ++v) {
      const auto bv = static_cast<std::size_t>(v);
      Mat s_sigma = Mat::Zero(p, p), m_phia = Mat::Zero(p, p);
      for (int i : blk) {
        s_sigma += cs[static_cast<std::size_t>(i)][bv];
        m_phia += cx[static_cast<std::size_t>(i)][bv];
      }
      if (counts.count(ConfigKey::sigma2(u, v)))
        s_[ConfigKey::sigma2(u, v)] = s_sigma;
      if (counts.count(ConfigKey::phi_a(u, v))) {
        // For u==v the sum already covers both orientations.
        Mat s_phia = (u == v) ? m_phia : Mat(m_phia + m_phia.transpose());
        auto key = ConfigKey::phi_a(u, v);
        auto it = s_.find(key);
        if (it == s_.end()) s_[key] = s_phia;
      }
      for (int w = v; w < B; ++w) {
        const auto bw = static_cast<std::size_t>(w);
        Mat s_phib = Mat::Zero(p, p), s_phic = Mat::Zero(p, p);
        for (int i : blk) {
          const auto a = static_cast<std::size_t>(i);
          if (v == w) {
            s_phib += as[a][bv] * as[a][bv].transpose() - cs[a][bv];
            s_phic += ar[a][bv] * ar[a][bv].transpose() - cr[a][bv];
          } else {
            s_phib += as[a][bv] * as[a][bw].transpose() +
                      as[a][bw] * as[a][bv].transpose();
            s_phic += ar[a][bv] * ar[a][bw].transpose() +
                      ar[a][bw] * ar[a][bv].transpose();
          }
        }
        if (counts.count(ConfigKey::phi_b(u, v, w)))
          s_[ConfigKey::phi_b(u, v, w)] = s_phib;
        if (counts.count(ConfigKey::phi_c(u, v, w)))
          s_[ConfigKey::phi_c(u, v, w)] = s_phic;
      }
      for (int w = 0; w < B; ++w) {
        const auto bw = static_cast<std::size_t>(w);
        Mat half = Mat::Zero(p, p);
        for (int i : blk) {
          const auto a = static_cast<std::size_t>(i);
          half += as[a][bv] * ar[a][bw].transpose();
          if (v == w) half -= cx[a][bv];
        }
        if (counts.count(ConfigKey::phi_d(u, v, w)))
          s_[ConfigKey::phi_d(u, v, w)] = half + half.transpose();
      }
    }
  }
}

Eigen::MatrixXd SandwichParts::xt_omega_x(
    const std::map<ConfigKey, double>& params) const {
  if (s_.empty()) return Eigen::MatrixXd();
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(s_.begin()->second.rows(), s_.begin()->second.cols());
  for (const auto& [key, smat] : s_) {
    auto it = params.find(key);
    if (it == params.end())
      throw NumericalError("covariance parameter missing for key " +
                           key.to_string());
    out += it->second * smat;
  }
  return out;
}

Eigen::MatrixXd xt_omega_x_dc(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& residuals, int n) {
  const auto p = X.cols();
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;
  Mat diag = Mat::Zero(p, p), recip = Mat::Zero(p, p), sender = Mat::Zero(p, p),
      receiver = Mat::Zero(p, p), mixed_half = Mat::Zero(p, p);
  for (int i = 0; i < n; ++i) {
    Vec s_out = Vec::Zero(p), s_in = Vec::Zero(p);
    Mat c_out = Mat::Zero(p, p), c_in = Mat::Zero(p, p), c_x = Mat::Zero(p, p);
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int ij = DirectedNetwork::dyad_index(i, j, n);
      const int ji = DirectedNetwork::dyad_index(j, i, n);
      const Vec vij = residuals(ij) * X.row(ij).transpose();
      const Vec vji = residuals(ji) * X.row(ji).transpose();
      s_out += vij;
      s_in += vji;
      c_out += vij * vij.transpose();
      c_in += vji * vji.transpose();
      c_x += vij * vji.transpose();
    }
    diag += c_out;
    recip += c_x;
    sender += s_out * s_out.transpose() - c_out;
    receiver += s_in * s_in.transpose() - c_in;
    mixed_half += s_out * s_in.transpose() - c_x;
  }
  return diag + recip + sender + receiver + mixed_half +
         mixed_half.transpose();
}

Eigen::MatrixXd sandwich_vcov(const RegressionFit& fit,
                              const CovarianceModel& model) {
  Eigen::MatrixXd xox;
  if (model.kind == CovKind::DyadicClustering) {
    xox = xt_omega_x_dc(fit.design, model.residuals, fit.n);
  } else {
    if (!model.blocks)
      throw ValidationError("parameterized covariance model lacks blocks");
    SandwichParts parts(fit.design, *model.blocks);
    xox = parts.xt_omega_x(model.params);
  }
  return fit.xtx_inv * xox * fit.xtx_inv;
}

SandwichResult sandwich(const RegressionFit& fit, const CovarianceModel& model,
                        double alpha) {
  SandwichResult res;
  res.vcov = sandwich_vcov(fit, model);
  res.alpha = alpha;
  const auto p = res.vcov.rows();
  res.se.resize(p);
  res.ci_lower.resize(p);
  res.ci_upper.resize(p);
  const double z = z_critical(alpha);
  for (Eigen::Index k = 0; k < p; ++k) {
    if (res.vcov(k, k) < 0.0)
      throw NumericalError("sandwich produced negative variance");
    res.se(k) = std::sqrt(res.vcov(k, k));
    res.ci_lower(k) = fit.beta_hat(k) - z * res.se(k);
    res.ci_upper(k) = fit.beta_hat(k) + z * res.se(k);
  }
  return res;
}

Eigen::MatrixXd theorem_gap(const RegressionFit& fit,
                            const CovarianceModel& model_block,
                            const CovarianceModel& model_exch) {
  return static_cast<double>(fit.n) *
         (sandwich_vcov(fit, model_block) - sandwich_vcov(fit, model_exch));
}

}  // namespace netreg
