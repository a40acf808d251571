#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace nheavy {

using Edge = std::pair<int, int>;

/// Directed binary network with zero diagonal, stored as sorted out-neighbour
/// lists (row i lists every j with a_ij = 1). Immutable after construction.
class AdjacencyMatrix {
 public:
  /// Empty graph on n nodes.
  explicit AdjacencyMatrix(int n = 0);

  /// Throws InvalidInput on self-loops, out-of-range indices or n < 0.
  /// Duplicate edges collapse to a single entry.
  static AdjacencyMatrix from_edges(int n, std::span<const Edge> edges);

  /// Entries must be exactly 0 or 1 with a zero diagonal.
  static AdjacencyMatrix from_dense(const Eigen::MatrixXd& a);

  int size() const { return n_; }
  bool has_edge(int i, int j) const;
  std::span<const int> neighbors(int i) const;
  int out_degree(int i) const { return offsets_[i + 1] - offsets_[i]; }
  std::int64_t edge_count() const { return static_cast<std::int64_t>(targets_.size()); }

  std::vector<Edge> edges() const;
  Eigen::MatrixXd to_dense() const;

  bool operator==(const AdjacencyMatrix&) const = default;

 private:
  int n_ = 0;
  std::vector<int> offsets_;
  std::vector<int> targets_;
};

/// Row-normalised network W = D^{-1} A; rows of isolated nodes are zero.
class NormalizedNetwork {
 public:
  NormalizedNetwork() = default;
  explicit NormalizedNetwork(AdjacencyMatrix a);

  int size() const { return adjacency_.size(); }
  const AdjacencyMatrix& adjacency() const { return adjacency_; }
  const std::vector<int>& degrees() const { return degrees_; }

  /// W x.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  /// Applies W to every row of a days-by-assets panel: out.row(t) = (W panel.row(t)^T)^T.
  template <typename Panel>
  Panel apply_rows(const Panel& panel) const {
    Panel out(panel.rows(), panel.cols());
    for (Eigen::Index t = 0; t < panel.rows(); ++t) {
      for (int i = 0; i < size(); ++i) {
        auto nb = adjacency_.neighbors(i);
        double s = 0.0;
        for (int j : nb) s += panel(t, j);
        out(t, i) = nb.empty() ? 0.0 : s / static_cast<double>(nb.size());
      }
    }
    return out;
  }

  Eigen::MatrixXd dense() const;

 private:
  AdjacencyMatrix adjacency_;
  std::vector<int> degrees_;
};

std::vector<int> out_degrees(const AdjacencyMatrix& a);
std::vector<int> in_degrees(const AdjacencyMatrix& a);
NormalizedNetwork normalize(const AdjacencyMatrix& a);

/// Fraction of realised directed edges, sum a_ij / (N(N-1)). Requires N >= 2.
double density(const AdjacencyMatrix& a);

// Random designs. Each is a pure function of its arguments.

/// Dyad independence: each unordered pair is mutual with probability 20/n and
/// one-directional (each way) with probability 0.5 n^{-0.8}.
AdjacencyMatrix gen_dyad(int n, std::uint64_t seed);
double dyad_expected_density(int n);

/// Power-law in-degrees: node i draws d_i with P(d = k) proportional to k^{-alpha},
/// k = 1..n-1, then d_i distinct followers j (a_ji = 1) uniformly at random.
AdjacencyMatrix gen_powerlaw(int n, double alpha, std::uint64_t seed);
double powerlaw_expected_density(int n, double alpha);
/// P(d = k) for k = 1..n-1 (index k-1).
std::vector<double> powerlaw_degree_pmf(int n, double alpha);

/// Stochastic block model with k equiprobable block labels; directed entries are
/// Bernoulli(0.3 n^{-0.3}) within a block and Bernoulli(0.3 / n) across blocks.
AdjacencyMatrix gen_sbm(int n, int k, std::uint64_t seed);
double sbm_expected_density(int n, int k);

/// Complete graphs within consecutive groups (e.g. sector membership), none across.
AdjacencyMatrix group_network(std::span<const int> group_sizes);

}  // namespace nheavy
