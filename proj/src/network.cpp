#include "nheavy/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "nheavy/errors.hpp"
#include "nheavy/rng.hpp"

namespace nheavy {

AdjacencyMatrix::AdjacencyMatrix(int n) : n_(n), offsets_(static_cast<std::size_t>(std::max(n, 0)) + 1, 0) {
  if (n < 0) throw InvalidInput("network size must be nonnegative");
}

AdjacencyMatrix AdjacencyMatrix::from_edges(int n, std::span<const Edge> edges) {
  AdjacencyMatrix a(n);
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(n));
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw InvalidInput("edge (" + std::to_string(i) + "," + std::to_string(j) +
                         ") out of range for n=" + std::to_string(n));
    }
    if (i == j) throw InvalidInput("self-loop at node " + std::to_string(i) + "; diagonal must be zero");
    rows[i].push_back(j);
  }
  a.targets_.clear();
  for (int i = 0; i < n; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    a.offsets_[i + 1] = a.offsets_[i] + static_cast<int>(r.size());
    a.targets_.insert(a.targets_.end(), r.begin(), r.end());
  }
  return a;
}

AdjacencyMatrix AdjacencyMatrix::from_dense(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw InvalidInput("adjacency matrix must be square");
  const int n = static_cast<int>(m.rows());
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = m(i, j);
      if (v != 0.0 && v != 1.0) throw InvalidInput("adjacency entries must be 0 or 1");
      if (v == 1.0) edges.emplace_back(i, j);
    }
  }
  return from_edges(n, edges);
}

bool AdjacencyMatrix::has_edge(int i, int j) const {
  auto nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

std::span<const int> AdjacencyMatrix::neighbors(int i) const {
  return {targets_.data() + offsets_[i], static_cast<std::size_t>(offsets_[i + 1] - offsets_[i])};
}

std::vector<Edge> AdjacencyMatrix::edges() const {
  std::vector<Edge> out;
  out.reserve(targets_.size());
  for (int i = 0; i < n_; ++i) {
    for (int j : neighbors(i)) out.emplace_back(i, j);
  }
  return out;
}

Eigen::MatrixXd AdjacencyMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (int j : neighbors(i)) m(i, j) = 1.0;
  }
  return m;
}

NormalizedNetwork::NormalizedNetwork(AdjacencyMatrix a) : adjacency_(std::move(a)), degrees_(out_degrees(adjacency_)) {}

Eigen::VectorXd NormalizedNetwork::apply(const Eigen::VectorXd& x) const {
  if (x.size() != size()) throw InvalidInput("vector length does not match network size");
  Eigen::VectorXd out(size());
  for (int i = 0; i < size(); ++i) {
    auto nb = adjacency_.neighbors(i);
    double s = 0.0;
    for (int j : nb) s += x[j];
    out[i] = nb.empty() ? 0.0 : s / static_cast<double>(nb.size());
  }
  return out;
}

Eigen::MatrixXd NormalizedNetwork::dense() const {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(size(), size());
  for (int i = 0; i < size(); ++i) {
    auto nb = adjacency_.neighbors(i);
    for (int j : nb) w(i, j) = 1.0 / static_cast<double>(nb.size());
  }
  return w;
}

std::vector<int> out_degrees(const AdjacencyMatrix& a) {
  std::vector<int> d(static_cast<std::size_t>(a.size()));
  for (int i = 0; i < a.size(); ++i) d[i] = a.out_degree(i);
  return d;
}

std::vector<int> in_degrees(const AdjacencyMatrix& a) {
  std::vector<int> d(static_cast<std::size_t>(a.size()), 0);
  for (int i = 0; i < a.size(); ++i) {
    for (int j : a.neighbors(i)) ++d[j];
  }
  return d;
}

NormalizedNetwork normalize(const AdjacencyMatrix& a) { return NormalizedNetwork(a); }

double density(const AdjacencyMatrix& a) {
  const int n = a.size();
  if (n < 2) throw InvalidInput("network density requires at least two nodes");
  return static_cast<double>(a.edge_count()) / (static_cast<double>(n) * (n - 1));
}

namespace {

struct DyadProbabilities {
  double mutual;
  double one_way;  // each direction
};

DyadProbabilities dyad_probabilities(int n) {
  if (n < 2) throw InvalidInput("dyad model requires n >= 2");
  const DyadProbabilities p{20.0 / n, 0.5 * std::pow(static_cast<double>(n), -0.8)};
  const double rest = 1.0 - p.mutual - 2.0 * p.one_way;
  if (p.mutual > 1.0 || rest < 0.0) {
    throw InvalidInput("dyad probabilities leave [0,1] for n=" + std::to_string(n) +
                       " (mutual 20/n plus one-way mass exceeds 1)");
  }
  return p;
}

}  // namespace

AdjacencyMatrix gen_dyad(int n, std::uint64_t seed) {
  const auto p = dyad_probabilities(n);
  Rng rng(seed, Stream::network);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double u = rng.uniform();
      if (u < p.mutual) {
        edges.emplace_back(i, j);
        edges.emplace_back(j, i);
      } else if (u < p.mutual + p.one_way) {
        edges.emplace_back(i, j);
      } else if (u < p.mutual + 2.0 * p.one_way) {
        edges.emplace_back(j, i);
      }
    }
  }
  return AdjacencyMatrix::from_edges(n, edges);
}

double dyad_expected_density(int n) {
  const auto p = dyad_probabilities(n);
  return p.mutual + p.one_way;
}

std::vector<double> powerlaw_degree_pmf(int n, double alpha) {
  if (!(alpha >= 1.0)) throw InvalidInput("power-law exponent must be >= 1");
  if (n < 2) throw InvalidInput("power-law model requires n >= 2");
  std::vector<double> pmf(static_cast<std::size_t>(n - 1));
  for (int k = 1; k < n; ++k) pmf[k - 1] = std::pow(static_cast<double>(k), -alpha);
  const double c = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  for (double& v : pmf) v /= c;
  return pmf;
}

AdjacencyMatrix gen_powerlaw(int n, double alpha, std::uint64_t seed) {
  const auto pmf = powerlaw_degree_pmf(n, alpha);
  Rng rng(seed, Stream::network);
  std::discrete_distribution<int> degree(pmf.begin(), pmf.end());
  std::vector<Edge> edges;
  std::vector<int> pool(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    const int d = degree(rng.engine()) + 1;
    // candidates exclude i itself
    for (int j = 0, k = 0; j < n; ++j) {
      if (j != i) pool[k++] = j;
    }
    for (int s = 0; s < d; ++s) {
      const int pick = rng.uniform_int(s, n - 2);
      std::swap(pool[s], pool[pick]);
      edges.emplace_back(pool[s], i);
    }
  }
  return AdjacencyMatrix::from_edges(n, edges);
}

double powerlaw_expected_density(int n, double alpha) {
  const auto pmf = powerlaw_degree_pmf(n, alpha);
  double mean = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) mean += static_cast<double>(k + 1) * pmf[k];
  return mean / (n - 1);
}

AdjacencyMatrix gen_sbm(int n, int k, std::uint64_t seed) {
  if (n < 1) throw InvalidInput("block model requires n >= 1");
  if (k < 1 || k > n) {
    throw InvalidInput("block count k=" + std::to_string(k) + " must lie in [1, n=" + std::to_string(n) + "]");
  }
  const double p_in = 0.3 * std::pow(static_cast<double>(n), -0.3);
  const double p_out = 0.3 / n;
  Rng rng(seed, Stream::network);
  std::vector<int> label(static_cast<std::size_t>(n));
  for (int& l : label) l = rng.uniform_int(0, k - 1);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (rng.bernoulli(label[i] == label[j] ? p_in : p_out)) edges.emplace_back(i, j);
    }
  }
  return AdjacencyMatrix::from_edges(n, edges);
}

double sbm_expected_density(int n, int k) {
  if (k < 1 || k > n) throw InvalidInput("block count must lie in [1, n]");
  const double p_in = 0.3 * std::pow(static_cast<double>(n), -0.3);
  const double p_out = 0.3 / n;
  const double same = 1.0 / k;
  return same * p_in + (1.0 - same) * p_out;
}

AdjacencyMatrix group_network(std::span<const int> group_sizes) {
  int n = 0;
  std::vector<Edge> edges;
  for (int g : group_sizes) {
    if (g < 1) throw InvalidInput("group sizes must be positive");
    for (int i = n; i < n + g; ++i) {
      for (int j = n; j < n + g; ++j) {
        if (i != j) edges.emplace_back(i, j);
      }
    }
    n += g;
  }
  return AdjacencyMatrix::from_edges(n, edges);
}

}  // namespace nheavy
