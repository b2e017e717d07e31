#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "netreg/errors.hpp"

namespace netreg {

// Block labels are 0-based internally; [1..B] in all serialized output.
struct BlockAssignment {
  std::vector<int> labels;  // length n, values in [0, B)
  int num_blocks = 0;

  BlockAssignment() = default;
  BlockAssignment(std::vector<int> g, int B);

  int n() const { return static_cast<int>(labels.size()); }
  int operator[](int i) const { return labels[static_cast<std::size_t>(i)]; }

  // Actors per block.
  std::vector<int> block_sizes() const;

  static BlockAssignment trivial(int n) {
    return BlockAssignment(std::vector<int>(static_cast<std::size_t>(n), 0), 1);
  }
};

// Complete directed network without self-loops. Responses and covariates are
// stored in the canonical receiver-major dyad order: all senders for
// receiver 1, then receiver 2, and so on. Immutable after construction.
class DirectedNetwork {
public:
  // y in canonical order, covariates (without intercept) row-per-dyad.
  DirectedNetwork(int n, Eigen::VectorXd y, Eigen::MatrixXd covariates,
                  std::vector<std::string> actor_labels = {});

  int n() const { return n_; }
  int num_dyads() const { return n_ * (n_ - 1); }
  int num_covariates() const { return static_cast<int>(covariates_.cols()); }

  const Eigen::VectorXd& response() const { return y_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::vector<std::string>& actor_labels() const { return labels_; }

  // Canonical index of dyad (sender i -> receiver j), actors 0-based.
  int dyad_index(int i, int j) const { return dyad_index(i, j, n_); }
  static int dyad_index(int i, int j, int n) {
    return j * (n - 1) + i - (i > j ? 1 : 0);
  }

  // Inverse of dyad_index.
  std::pair<int, int> dyad_at(int idx) const { return dyad_at(idx, n_); }
  static std::pair<int, int> dyad_at(int idx, int n) {
    int j = idx / (n - 1);
    int r = idx % (n - 1);
    int i = r >= j ? r + 1 : r;
    return {i, j};
  }

private:
  int n_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd covariates_;
  std::vector<std::string> labels_;
};

// Parses `src,dst,y,x1,...,xk` CSV. Collects the complete list of problems
// (self-loops, duplicates, missing pairs, bad numbers) instead of stopping at
// the first one.
struct CsvParseResult {
  std::optional<DirectedNetwork> network;
  std::vector<std::string> errors;
};

CsvParseResult read_network_csv(const std::string& path);
CsvParseResult parse_network_csv(const std::string& content);

void write_network_csv(const DirectedNetwork& net, const std::string& path);

// `actor,block` CSV with labels matching the network's actors.
BlockAssignment read_blocks_csv(const std::string& path,
                                const DirectedNetwork& net);
void write_blocks_csv(const BlockAssignment& g,
                      const std::vector<std::string>& labels,
                      const std::string& path);

}  // namespace netreg
