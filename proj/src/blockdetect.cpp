#include "netreg/blockdetect.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "netreg/errors.hpp"
#include "netreg/parallel.hpp"
#include "netreg/rng.hpp"

namespace netreg {

namespace {

// LSD radix sort on the order-preserving bit image of a double. Worthwhile
// for the large residual-product arrays; small arrays go to std::sort.
void sort_doubles(std::vector<double>& v) {
  if (v.size() < 1024) {
    std::sort(v.begin(), v.end());
    return;
  }
  const std::size_t n = v.size();
  std::vector<std::uint64_t> keys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &v[i], sizeof(bits));
    keys[i] = (bits & 0x8000000000000000ULL) ? ~bits
                                             : bits | 0x8000000000000000ULL;
  }
  std::size_t hist[256];
  for (int pass = 0; pass < 8; ++pass) {
    const int shift = pass * 8;
    std::fill(std::begin(hist), std::end(hist), 0);
    for (std::size_t i = 0; i < n; ++i) ++hist[(keys[i] >> shift) & 0xff];
    std::size_t total = 0;
    for (int b = 0; b < 256; ++b) {
      const std::size_t c = hist[b];
      hist[b] = total;
      total += c;
    }
    for (std::size_t i = 0; i < n; ++i)
      buf[hist[(keys[i] >> shift) & 0xff]++] = keys[i];
    std::swap(keys, buf);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = keys[i];
    bits = (bits & 0x8000000000000000ULL) ? bits & 0x7fffffffffffffffULL
                                          : ~bits;
    std::memcpy(&v[i], &bits, sizeof(bits));
  }
}

std::size_t quantile_rank(std::size_t n, int k, int m) {
  const double level = (k - 0.5) / m;
  auto idx =
      static_cast<std::size_t>(std::ceil(level * static_cast<double>(n))) - 1;
  return idx >= n ? n - 1 : idx;
}

// Order statistics at m midpoint levels; the input must be sorted.
std::vector<double> compress_quantiles(const std::vector<double>& sorted,
                                       int m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int k = 1; k <= m; ++k) out.push_back(sorted[quantile_rank(sorted.size(), k, m)]);
  return out;
}


}  // namespace

ResidualProductSets residual_product_sets(const RegressionFit& fit,
                                          std::optional<int> quantiles) {
  const int n = fit.n;
  if (n < 3) throw ValidationError("residual product sets need n >= 3");
  if (quantiles && *quantiles < 1)
    throw ValidationError("quantile count must be positive");
  const Eigen::VectorXd& r = fit.residuals;

  ResidualProductSets out;
  out.n = n;
  out.compressed = quantiles.has_value();
  out.sets.resize(static_cast<std::size_t>(n));

  std::vector<double> sent(static_cast<std::size_t>(n - 1));
  std::vector<double> recv(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    int t = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      sent[static_cast<std::size_t>(t)] = r(DirectedNetwork::dyad_index(i, j, n));
      recv[static_cast<std::size_t>(t)] = r(DirectedNetwork::dyad_index(j, i, n));
      ++t;
    }
    auto& dest = out.sets[static_cast<std::size_t>(i)];
    const auto m = static_cast<std::size_t>(n - 1);

    auto& var_set = dest[static_cast<int>(Config::Sigma2)];
    var_set.reserve(2 * m);
    for (double v : sent) var_set.push_back(v * v);
    for (double v : recv) var_set.push_back(v * v);

    auto& recip_set = dest[static_cast<int>(Config::PhiA)];
    recip_set.reserve(m);
    for (std::size_t a = 0; a < m; ++a) recip_set.push_back(sent[a] * recv[a]);

    auto& send_set = dest[static_cast<int>(Config::PhiB)];
    auto& recv_set = dest[static_cast<int>(Config::PhiC)];
    if (out.compressed) {
      // Duplicated ordered products leave the empirical CDF unchanged, so
      // the half list gives identical quantiles.
      send_set.reserve(m * (m - 1) / 2);
      recv_set.reserve(m * (m - 1) / 2);
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
          send_set.push_back(sent[a] * sent[b]);
          recv_set.push_back(recv[a] * recv[b]);
        }
      }
    } else {
      send_set.reserve(m * (m - 1));
      recv_set.reserve(m * (m - 1));
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
          if (a == b) continue;
          send_set.push_back(sent[a] * sent[b]);
          recv_set.push_back(recv[a] * recv[b]);
        }
      }
    }

    auto& mixed_set = dest[static_cast<int>(Config::PhiD)];
    mixed_set.reserve(m * (m - 1));
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        if (a == b) continue;
        mixed_set.push_back(sent[a] * recv[b]);
      }
    }

    for (auto& set : dest) {
      sort_doubles(set);
      if (out.compressed) set = compress_quantiles(set, *quantiles);
    }
  }
  return out;
}

double ks_statistic_sorted(const std::vector<double>& a,
                           const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw ValidationError("KS statistic requires nonempty samples");
  std::size_t i = 0, j = 0;
  if (a.size() == b.size()) {
    // Equal samples: the sup distance is max|i-j|/m over the merge.
    std::size_t d = 0;
    while (i < a.size() && j < b.size()) {
      const double x = std::min(a[i], b[j]);
      while (i < a.size() && a[i] <= x) ++i;
      while (j < b.size() && b[j] <= x) ++j;
      const std::size_t diff = i > j ? i - j : j - i;
      if (diff > d) d = diff;
    }
    return static_cast<double>(d) / static_cast<double>(a.size());
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na -
                              static_cast<double>(j) / nb));
  }
  return d;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return ks_statistic_sorted(a, b);
}

Eigen::MatrixXd similarity_matrix(const ResidualProductSets& sets,
                                  int n_threads) {
  const int n = sets.n;
  Eigen::MatrixXd s = Eigen::MatrixXd::Ones(n, n);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), n_threads, [&](std::size_t t) {
    auto [i, j] = pairs[t];
    double total = 0.0;
    for (int m = 0; m < 5; ++m)
      total += ks_statistic_sorted(
          sets.sets[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)],
          sets.sets[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)]);
    s(i, j) = s(j, i) = 1.0 - total / 5.0;
  });
  return s;
}

Eigen::MatrixXd knn_graph(const Eigen::MatrixXd& similarity, int k) {
  const int n = static_cast<int>(similarity.rows());
  if (k < 1 || k > n - 1)
    throw ValidationError("KNN neighbor count must be in [1, n-1]");
  // k-th largest similarity per actor; everything >= it is a neighbor.
  Eigen::VectorXd threshold(n);
  std::vector<double> buf(static_cast<std::size_t>(n - 1));
  for (int j = 0; j < n; ++j) {
    int t = 0;
    for (int i = 0; i < n; ++i)
      if (i != j) buf[static_cast<std::size_t>(t++)] = similarity(i, j);
    std::nth_element(buf.begin(), buf.begin() + (k - 1), buf.end(),
                     std::greater<double>());
    threshold(j) = buf[static_cast<std::size_t>(k - 1)];
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (similarity(i, j) >= threshold(j) || similarity(j, i) >= threshold(i))
        w(i, j) = w(j, i) = similarity(i, j);
    }
  }
  return w;
}

namespace {

struct KMeansRun {
  std::vector<int> labels;
  double wcss = std::numeric_limits<double>::infinity();
};

double point_dist2(const Eigen::MatrixXd& pts, int a,
                   const Eigen::RowVectorXd& c) {
  return (pts.row(a) - c).squaredNorm();
}

KMeansRun kmeans_once(const Eigen::MatrixXd& pts, int k, RngStream& rng) {
  const int n = static_cast<int>(pts.rows());
  Eigen::MatrixXd centers(k, pts.cols());

  // Greedy k-means++: several candidates per step, keep the one that lowers
  // the total squared distance the most.
  std::vector<double> d2(static_cast<std::size_t>(n),
                         std::numeric_limits<double>::infinity());
  centers.row(0) = pts.row(static_cast<int>(rng.uniform_index(n)));
  for (int i = 0; i < n; ++i)
    d2[static_cast<std::size_t>(i)] = point_dist2(pts, i, centers.row(0));
  const int candidates = 3;
  for (int c = 1; c < k; ++c) {
    double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    int best_idx = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (int t = 0; t < candidates; ++t) {
      int idx = 0;
      if (total > 0.0) {
        double u = rng.uniform() * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          acc += d2[static_cast<std::size_t>(i)];
          if (u <= acc) {
            idx = i;
            break;
          }
        }
      } else {
        idx = static_cast<int>(rng.uniform_index(n));
      }
      double sum = 0.0;
      for (int i = 0; i < n; ++i)
        sum += std::min(d2[static_cast<std::size_t>(i)],
                        point_dist2(pts, i, pts.row(idx)));
      if (sum < best_sum) {
        best_sum = sum;
        best_idx = idx;
      }
    }
    centers.row(c) = pts.row(best_idx);
    for (int i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] = std::min(
          d2[static_cast<std::size_t>(i)], point_dist2(pts, i, centers.row(c)));
  }

  KMeansRun run;
  run.labels.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double d = point_dist2(pts, i, centers.row(c));
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (run.labels[static_cast<std::size_t>(i)] != best) {
        run.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    // Recompute centers; repopulate an empty cluster with the point farthest
    // from its current center.
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    centers.setZero();
    for (int i = 0; i < n; ++i) {
      centers.row(run.labels[static_cast<std::size_t>(i)]) += pts.row(i);
      ++sizes[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) /= sizes[static_cast<std::size_t>(c)];
      } else {
        int far = 0;
        double fd = -1.0;
        for (int i = 0; i < n; ++i) {
          double d = point_dist2(
              pts, i, centers.row(run.labels[static_cast<std::size_t>(i)]));
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        centers.row(c) = pts.row(far);
        run.labels[static_cast<std::size_t>(far)] = c;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
  }
  run.wcss = 0.0;
  for (int i = 0; i < n; ++i)
    run.wcss +=
        point_dist2(pts, i, centers.row(run.labels[static_cast<std::size_t>(i)]));
  return run;
}

// Relabels clusters by first appearance so output does not depend on the
// arbitrary k-means label order.
std::vector<int> canonical_labels(const std::vector<int>& labels, int k) {
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int next = 0;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int& m = remap[static_cast<std::size_t>(labels[i])];
    if (m < 0) m = next++;
    out[i] = m;
  }
  return out;
}

Eigen::MatrixXd laplacian(const Eigen::MatrixXd& w) {
  Eigen::VectorXd deg = w.rowwise().sum();
  Eigen::MatrixXd l = -w;
  l.diagonal() += deg;
  return l;
}

}  // namespace

SpectralClusterResult spectral_cluster(const Eigen::MatrixXd& weights,
                                       int num_blocks, std::uint64_t seed) {
  const int n = static_cast<int>(weights.rows());
  if (num_blocks < 2) throw ValidationError("spectral clustering needs B >= 2");
  if (num_blocks > n) throw ValidationError("more blocks than actors");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian(weights));
  if (eig.info() != Eigen::Success)
    throw NumericalError("Laplacian eigendecomposition failed");

  SpectralClusterResult res;
  res.laplacian_eigenvalues = eig.eigenvalues().head(num_blocks);

  int zero_count = 0;
  for (int i = 0; i < n; ++i)
    if (std::fabs(eig.eigenvalues()(i)) < 1e-8) ++zero_count;
  if (zero_count > num_blocks)
    res.warnings.push_back("graph has " + std::to_string(zero_count) +
                           " connected components, more than B=" +
                           std::to_string(num_blocks) +
                           "; clustering proceeds");

  Eigen::MatrixXd embedding = eig.eigenvectors().leftCols(num_blocks);
  for (int c = 0; c < num_blocks; ++c) {
    for (int i = 0; i < n; ++i) {
      if (std::fabs(embedding(i, c)) > 1e-10) {
        if (embedding(i, c) < 0) embedding.col(c) = -embedding.col(c);
        break;
      }
    }
  }

  RngStream rng(seed, RngStream::derive({0x6b6d65616e73ULL}));
  KMeansRun best;
  for (int restart = 0; restart < 25; ++restart) {
    KMeansRun run = kmeans_once(embedding, num_blocks, rng);
    if (run.wcss < best.wcss) best = run;
  }
  res.kmeans_wcss = best.wcss;
  res.assignment =
      BlockAssignment(canonical_labels(best.labels, num_blocks), num_blocks);
  return res;
}

EigengapResult eigengap_select(const Eigen::MatrixXd& weights, int b_max) {
  const int n = static_cast<int>(weights.rows());
  if (b_max >= n) throw ValidationError("B_max must be below n");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian(weights));
  if (eig.info() != Eigen::Success)
    throw NumericalError("Laplacian eigendecomposition failed");

  EigengapResult res;
  res.eigenvalues = eig.eigenvalues().head(b_max + 1);
  std::vector<std::pair<double, int>> gaps;
  for (int k = 1; k <= b_max; ++k)
    gaps.emplace_back(res.eigenvalues(k) - res.eigenvalues(k - 1), k);
  std::stable_sort(gaps.begin(), gaps.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });
  for (const auto& [gap, k] : gaps) res.ranked_b.push_back(k);
  return res;
}

double misclustering(const BlockAssignment& truth,
                     const BlockAssignment& estimate) {
  if (truth.n() != estimate.n())
    throw ValidationError("misclustering requires equal lengths");
  if (truth.num_blocks != estimate.num_blocks)
    throw ValidationError("misclustering requires equal block counts");
  const int b = truth.num_blocks;
  if (b > 8)
    throw ValidationError("misclustering limited to B <= 8 (factorial scan)");
  std::vector<int> perm(static_cast<std::size_t>(b));
  std::iota(perm.begin(), perm.end(), 0);
  int best = truth.n();
  do {
    int wrong = 0;
    for (int i = 0; i < truth.n(); ++i)
      if (truth[i] != perm[static_cast<std::size_t>(estimate[i])]) ++wrong;
    best = std::min(best, wrong);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / truth.n();
}

SpectralClusterResult detect_blocks(const RegressionFit& fit,
                                    const BlockDetectOptions& opts) {
  auto sets = residual_product_sets(fit, opts.quantiles);
  auto s = similarity_matrix(sets, opts.n_threads);
  auto w = knn_graph(s, default_knn(fit.n, opts.knn_fraction));
  return spectral_cluster(w, opts.num_blocks, opts.seed);
}

}  // namespace netreg
