#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "netreg/config_key.hpp"
#include "netreg/network.hpp"
#include "netreg/ols.hpp"

namespace netreg {

// Per-actor residual-product samples for the five configurations, sorted
// ascending. Exact cardinalities: 2(n-1), n-1, and (n-1)(n-2) for the three
// two-partner configurations; m per set when quantile-compressed.
struct ResidualProductSets {
  int n = 0;
  bool compressed = false;
  // sets[actor][config], config indexed by static_cast<int>(Config).
  std::vector<std::array<std::vector<double>, 5>> sets;
};

ResidualProductSets residual_product_sets(
    const RegressionFit& fit, std::optional<int> quantiles = std::nullopt);

// Two-sample Kolmogorov-Smirnov statistic, exact via a merged sweep.
double ks_statistic(std::vector<double> a, std::vector<double> b);
double ks_statistic_sorted(const std::vector<double>& a,
                           const std::vector<double>& b);

// s_ij = 1 - (sum over configurations of KS_{i,j,M}) / 5, diagonal 1.
Eigen::MatrixXd similarity_matrix(const ResidualProductSets& sets,
                                  int n_threads = 1);

// Symmetric KNN graph: w_ij = s_ij when either actor ranks among the other's
// K most similar. Ties at the K-th similarity are all kept (closed
// neighborhood), which makes the graph independent of actor order.
Eigen::MatrixXd knn_graph(const Eigen::MatrixXd& similarity, int k);

inline int default_knn(int n, double fraction = 0.2) {
  int k = static_cast<int>(std::lround(fraction * n));
  return std::max(1, std::min(k, n - 1));
}

struct SpectralClusterResult {
  BlockAssignment assignment;
  Eigen::VectorXd laplacian_eigenvalues;  // smallest B
  double kmeans_wcss = 0.0;
  std::vector<std::string> warnings;
};

// Unnormalized spectral clustering: embed actors with the eigenvectors of
// the B smallest Laplacian eigenvalues, then seeded k-means with restarts.
SpectralClusterResult spectral_cluster(const Eigen::MatrixXd& weights,
                                       int num_blocks, std::uint64_t seed);

struct EigengapResult {
  Eigen::VectorXd eigenvalues;       // smallest B_max + 1, ascending
  std::vector<int> ranked_b;         // candidate block counts, best gap first
};

EigengapResult eigengap_select(const Eigen::MatrixXd& weights, int b_max);

// Minimum fraction of misassigned actors over block-label permutations.
// Exhaustive scan, so limited to B <= 8.
double misclustering(const BlockAssignment& truth,
                     const BlockAssignment& estimate);

struct BlockDetectOptions {
  int num_blocks = 2;
  double knn_fraction = 0.2;
  std::optional<int> quantiles;  // compression off by default
  std::uint64_t seed = 0;
  int n_threads = 1;
};

// Full residuals-to-blocks pipeline.
SpectralClusterResult detect_blocks(const RegressionFit& fit,
                                    const BlockDetectOptions& opts);

}  // namespace netreg
