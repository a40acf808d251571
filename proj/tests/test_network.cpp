#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "nheavy/errors.hpp"
#include "nheavy/network.hpp"
#include "nheavy/rng.hpp"

using namespace nheavy;

TEST_CASE("adjacency construction validates and deduplicates") {
  const std::vector<Edge> edges = {{0, 1}, {1, 2}, {0, 1}, {2, 0}};
  const auto a = AdjacencyMatrix::from_edges(3, edges);
  CHECK(a.edge_count() == 3);
  CHECK(a.has_edge(0, 1));
  CHECK_FALSE(a.has_edge(1, 0));
  CHECK(a.out_degree(0) == 1);

  const std::vector<Edge> loop = {{1, 1}};
  CHECK_THROWS_AS(AdjacencyMatrix::from_edges(3, loop), InvalidInput);
  const std::vector<Edge> range = {{0, 3}};
  CHECK_THROWS_AS(AdjacencyMatrix::from_edges(3, range), InvalidInput);

  CHECK(AdjacencyMatrix::from_dense(a.to_dense()) == a);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 0) = 1.0;
  CHECK_THROWS_AS(AdjacencyMatrix::from_dense(bad), InvalidInput);
}

TEST_CASE("normalisation divides rows by out-degree and leaves isolated rows zero") {
  const std::vector<Edge> edges = {{0, 1}, {0, 2}, {1, 0}};
  const auto a = AdjacencyMatrix::from_edges(4, edges);
  const auto w = normalize(a);
  const Eigen::MatrixXd d = w.dense();
  CHECK(d(0, 1) == doctest::Approx(0.5));
  CHECK(d(0, 2) == doctest::Approx(0.5));
  CHECK(d(1, 0) == doctest::Approx(1.0));
  CHECK(d.row(2).isZero());
  CHECK(d.row(3).isZero());

  // sparse product against the dense matrix
  Eigen::VectorXd x(4);
  x << 1.0, 2.0, 3.0, 4.0;
  CHECK((w.apply(x) - d * x).norm() < 1e-14);
}

TEST_CASE("density counts directed edges over N(N-1)") {
  const std::array<int, 2> groups = {2, 3};
  const auto a = group_network(groups);
  CHECK(a.size() == 5);
  CHECK(a.edge_count() == 2 + 6);
  CHECK(density(a) == doctest::Approx(8.0 / 20.0));
  CHECK(a.has_edge(2, 4));
  CHECK_FALSE(a.has_edge(1, 2));
  CHECK_THROWS_AS(density(AdjacencyMatrix(1)), InvalidInput);
}

TEST_CASE("dyad model probabilities") {
  CHECK(dyad_expected_density(25) == doctest::Approx(0.8 + 0.5 * std::pow(25.0, -0.8)).epsilon(1e-14));
  CHECK_THROWS_AS(gen_dyad(21, 1), InvalidInput);
  CHECK_NOTHROW(gen_dyad(22, 1));

  // every unordered pair is mutual, one-way or empty; count the three outcomes
  const int n = 40;
  long mutual = 0, one_way = 0, pairs = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto a = gen_dyad(n, seed);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const bool ij = a.has_edge(i, j), ji = a.has_edge(j, i);
        mutual += ij && ji;
        one_way += ij != ji;
        ++pairs;
      }
    }
  }
  const double p11 = 20.0 / n;
  const double p10 = 0.5 * std::pow(n, -0.8);
  const double se_m = std::sqrt(p11 * (1 - p11) / pairs);
  const double se_o = std::sqrt(2 * p10 * (1 - 2 * p10) / pairs);
  CHECK(std::abs(static_cast<double>(mutual) / pairs - p11) < 4 * se_m);
  CHECK(std::abs(static_cast<double>(one_way) / pairs - 2 * p10) < 4 * se_o);
}

TEST_CASE("power-law in-degrees follow the truncated power law") {
  CHECK_THROWS_AS(gen_powerlaw(10, 0.5, 1), InvalidInput);
  const int n = 25;
  const double alpha = 2.0;
  const auto pmf = powerlaw_degree_pmf(n, alpha);
  double total = 0.0;
  for (double p : pmf) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pmf[1] / pmf[0] == doctest::Approx(std::pow(2.0, -alpha)));

  std::vector<long> counts(n - 1, 0);
  long draws = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const auto a = gen_powerlaw(n, alpha, seed);
    for (int d : in_degrees(a)) {
      REQUIRE(d >= 1);
      REQUIRE(d <= n - 1);
      ++counts[d - 1];
      ++draws;
    }
  }
  // chi-square goodness of fit, tail bins pooled until the expected count reaches 5
  double stat = 0.0;
  int bins = 0;
  double obs_pool = 0.0, exp_pool = 0.0;
  for (int k = 0; k < n - 1; ++k) {
    obs_pool += counts[k];
    exp_pool += pmf[k] * draws;
    if (exp_pool >= 5.0 || k == n - 2) {
      stat += (obs_pool - exp_pool) * (obs_pool - exp_pool) / exp_pool;
      ++bins;
      obs_pool = exp_pool = 0.0;
    }
  }
  const boost::math::chi_squared chi(bins - 1);
  CHECK(stat < boost::math::quantile(chi, 0.999));
}

TEST_CASE("power-law generator has no self-loops and exact in-degree sums") {
  const auto a = gen_powerlaw(30, 3.0, 11);
  long total = 0;
  for (int d : in_degrees(a)) total += d;
  CHECK(total == a.edge_count());
  for (int i = 0; i < a.size(); ++i) CHECK_FALSE(a.has_edge(i, i));
}

TEST_CASE("block model") {
  CHECK_THROWS_AS(gen_sbm(25, 30, 1), InvalidInput);
  CHECK_THROWS_AS(gen_sbm(25, 0, 1), InvalidInput);
  CHECK(sbm_expected_density(25, 1) == doctest::Approx(0.3 * std::pow(25.0, -0.3)));
  CHECK(sbm_expected_density(25, 5) == doctest::Approx(0.2 * 0.3 * std::pow(25.0, -0.3) + 0.8 * 0.3 / 25));
}

TEST_CASE("generators are deterministic in the seed") {
  CHECK(gen_dyad(30, 5) == gen_dyad(30, 5));
  CHECK(gen_powerlaw(30, 2.0, 5) == gen_powerlaw(30, 2.0, 5));
  CHECK(gen_sbm(30, 3, 5) == gen_sbm(30, 3, 5));
  CHECK_FALSE(gen_dyad(30, 5) == gen_dyad(30, 6));
}

TEST_CASE("derived seeds separate streams") {
  CHECK(derive_seed(1, Stream::network) != derive_seed(1, Stream::innovations));
  CHECK(derive_seed(1, Stream::network) != derive_seed(2, Stream::network));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}
