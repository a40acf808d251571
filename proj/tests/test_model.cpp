#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "nheavy/errors.hpp"
#include "nheavy/model.hpp"
#include "nheavy/network.hpp"

using namespace nheavy;

namespace {

NheavyParams sample_params(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NheavyParams p;
  p.phi = {0.01 + 0.1 * u(g), 0.3 * u(g), 0.3 * u(g), 0.9 * u(g)};
  const double a = u(g), l = u(g), b = u(g);
  const double scale = 0.95 * u(g) / (a + l + b);
  p.phi_r = {0.01 + 0.1 * u(g), a * scale, l * scale, b * scale};
  return p;
}

AdjacencyMatrix sample_network(std::mt19937_64& g, int n) {
  std::bernoulli_distribution coin(0.35);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && coin(g)) edges.emplace_back(i, j);
    }
  }
  return AdjacencyMatrix::from_edges(n, edges);
}

Panel positive_panel(std::mt19937_64& g, int t, int n) {
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Panel p(t, n);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < n; ++j) p(i, j) = u(g);
  }
  return p;
}

/// Non-recursive form x_it = sum_{k=1}^{t-1} b^{k-1} (c + a d_{i,t-k} + l (W d_{t-k})_i) + b^{t-1} x_i1,
/// with W applied from its dense form.
Panel direct_sum(double c, double a, double l, double b, const Eigen::MatrixXd& w, const Panel& d,
                 const Eigen::VectorXd& init) {
  const auto t_len = d.rows();
  const auto n = d.cols();
  Panel x(t_len, n);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = std::pow(b, static_cast<double>(t)) * init[i];
      for (Eigen::Index k = 1; k <= t; ++k) {
        double net = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) net += w(i, j) * d(t - k, j);
        s += std::pow(b, static_cast<double>(k - 1)) * (c + a * d(t - k, i) + l * net);
      }
      x(t, i) = s;
    }
  }
  return x;
}

double max_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return ((a - b).cwiseAbs().array() / (1e-300 + b.cwiseAbs().array())).maxCoeff();
}

}  // namespace

TEST_CASE("filter matches the non-recursive summation") {
  std::mt19937_64 g(42);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 1 + static_cast<int>(g() % 8);
    const int t = 2 + static_cast<int>(g() % 40);
    const auto p = sample_params(g);
    const auto a = sample_network(g, n);
    const auto w = normalize(a);
    PanelSeries panel{positive_panel(g, t, n), positive_panel(g, t, n)};
    const Eigen::VectorXd h0 = Eigen::VectorXd::Constant(n, 0.5);
    const Eigen::VectorXd m0 = Eigen::VectorXd::Constant(n, 0.7);
    const auto lat = filter(p, w, panel, h0, m0);
    const auto dense = a.to_dense();
    Eigen::MatrixXd wd = dense;
    for (int i = 0; i < n; ++i) {
      const double deg = dense.row(i).sum();
      if (deg > 0) wd.row(i) /= deg;
    }
    CHECK(max_rel(lat.h, direct_sum(p.phi.omega, p.phi.alpha, p.phi.lambda, p.phi.beta, wd, panel.rm, h0)) < 1e-10);
    CHECK(max_rel(lat.mu, direct_sum(p.phi_r.omega, p.phi_r.alpha, p.phi_r.lambda, p.phi_r.beta, wd, panel.rm, m0)) <
          1e-10);
  }
}

TEST_CASE("filter hand example and degenerate cases") {
  const std::vector<Edge> edges = {{0, 1}, {1, 0}};
  const auto w = normalize(AdjacencyMatrix::from_edges(2, edges));
  Panel rm(3, 2);
  rm << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  PanelSeries panel{rm, rm};
  const NheavyParams p{{0.1, 0.2, 0.3, 0.5}, {0.1, 0.2, 0.3, 0.4}};
  const Eigen::Vector2d init(1.0, 1.0);
  const auto lat = filter(p, w, panel, init, init);
  // h_{0,1} = 0.1 + 0.2*1 + 0.3*2 + 0.5*1 = 1.4 ; h_{0,2} = 0.1 + 0.2*3 + 0.3*4 + 0.5*1.4 = 2.6
  CHECK(lat.h(1, 0) == doctest::Approx(1.4));
  CHECK(lat.h(2, 0) == doctest::Approx(2.6));

  const NheavyParams flat{{0.3, 0.0, 0.0, 0.0}, {0.2, 0.0, 0.0, 0.0}};
  const auto c = filter(flat, w, panel, init, init);
  CHECK(c.h.bottomRows(2).isConstant(0.3));
  CHECK(c.mu.bottomRows(2).isConstant(0.2));

  CHECK_THROWS_AS(filter(p, w, panel, Eigen::Vector2d(0.0, 1.0), init), InvalidInput);
  panel.rm(1, 1) = std::nan("");
  CHECK_THROWS_AS(filter(p, w, panel, init, init), DataError);
}

TEST_CASE("block dynamics layout and closed-form powers") {
  std::mt19937_64 g(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 1 + static_cast<int>(g() % 6);
    const auto p = sample_params(g);
    const auto w = normalize(sample_network(g, n));
    const auto dyn = build_block_dynamics(p, w);
    CHECK(dyn.b.bottomLeftCorner(n, n).isZero());
    CHECK(dyn.b.topLeftCorner(n, n).isApprox(p.phi.beta * Eigen::MatrixXd::Identity(n, n)));
    Eigen::MatrixXd naive = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    CHECK((b_power(dyn, 0) - naive).cwiseAbs().maxCoeff() == 0.0);
    for (int j = 1; j <= 10; ++j) {
      naive = naive * dyn.b;
      CHECK((b_power(dyn, j) - naive).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  CHECK_THROWS_AS(b_power(build_block_dynamics({{1, 0.1, 0.1, 0.5}, {1, 0.1, 0.1, 0.5}}, normalize(AdjacencyMatrix(2))), -1),
                  InvalidInput);
}

TEST_CASE("single node block matrix") {
  const NheavyParams p{{0.1, 0.2, 0.3, 0.4}, {0.1, 0.25, 0.3, 0.35}};
  const auto dyn = build_block_dynamics(p, normalize(AdjacencyMatrix(1)));
  Eigen::Matrix2d expect;
  expect << 0.4, 0.2, 0.0, 0.6;
  CHECK(dyn.b.isApprox(expect));
}

TEST_CASE("stationarity report") {
  std::mt19937_64 g(11);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(g() % 8);
    const auto p = sample_params(g);
    const auto w = normalize(sample_network(g, n));
    const auto r = check_stationarity(p, w);
    CHECK(r.spectral_radius <= r.bound + 1e-12);
    const auto dyn = build_block_dynamics(p, w);
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(dyn.b).eigenvalues();
    CHECK(r.spectral_radius == doctest::Approx(ev.cwiseAbs().maxCoeff()).epsilon(1e-9));
  }
  const NheavyParams ok{{0.1, 0.1, 0.1, 0.5}, {0.1, 0.3, 0.3, 0.3}};
  const auto r = check_stationarity(ok, normalize(gen_sbm(10, 1, 3)));
  CHECK(r.stationary);
  CHECK(r.bound == doctest::Approx(0.9));

  // complete graph: W has a unit eigenvalue, so alpha_r + lambda_r + beta_r = 1.05 is explosive
  const std::array<int, 1> all = {6};
  const NheavyParams bad{{0.1, 0.1, 0.1, 0.5}, {0.1, 0.35, 0.35, 0.35}};
  const auto rb = check_stationarity(bad, normalize(group_network(all)));
  CHECK_FALSE(rb.stationary);
  CHECK(rb.spectral_radius == doctest::Approx(1.05));
}

TEST_CASE("multistep forecast equals iterated expectation maps") {
  std::mt19937_64 g(3);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 1 + static_cast<int>(g() % 6);
    const auto p = sample_params(g);
    const auto w = normalize(sample_network(g, n));
    const auto dyn = build_block_dynamics(p, w);
    Eigen::VectorXd x(2 * n);
    for (int i = 0; i < 2 * n; ++i) x[i] = 0.2 + 0.1 * i;
    const Eigen::VectorXd h0 = x.head(n), m0 = x.tail(n);
    Eigen::VectorXd it = x;
    for (int s = 0; s <= 10; ++s) {
      it = dyn.w + dyn.b * it;
      const auto f = forecast(p, w, h0, m0, s);
      CHECK((f.h - it.head(n)).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((f.mu - it.tail(n)).cwiseAbs().maxCoeff() < 1e-10);
    }
    // from the next-day state: steps = 1 is the state itself
    const auto f1 = forecast_from_next_state(dyn, h0, m0, 1);
    CHECK((f1.h - h0).norm() == 0.0);
    const auto f3 = forecast_from_next_state(dyn, h0, m0, 3);
    const Eigen::VectorXd two = dyn.w + dyn.b * (dyn.w + dyn.b * x);
    CHECK((f3.h - two.head(n)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("long-horizon forecasts converge to the unconditional mean") {
  const NheavyParams p{{0.05, 0.2, 0.1, 0.6}, {0.04, 0.3, 0.2, 0.4}};
  const auto w = normalize(gen_dyad(25, 2));
  const auto dyn = build_block_dynamics(p, w);
  const Eigen::VectorXd target = (Eigen::MatrixXd::Identity(50, 50) - dyn.b).lu().solve(dyn.w);
  const auto [eh, emu] = unconditional_means(dyn);
  CHECK((eh - target.head(25)).norm() < 1e-12);
  const Eigen::VectorXd h0 = Eigen::VectorXd::Constant(25, 5.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int s : {1, 5, 20, 80, 300}) {
    const auto f = forecast(p, w, h0, h0, s);
    Eigen::VectorXd all(50);
    all << f.h, f.mu;
    const double gap = (all - target).norm();
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 1e-8);

  const NheavyParams zero{{0.3, 0, 0, 0}, {0.2, 0, 0, 0}};
  const auto fz = forecast(zero, w, h0, h0, 4);
  CHECK(fz.h.isConstant(0.3));
  CHECK(fz.mu.isConstant(0.2));
}

TEST_CASE("targeting intercepts reproduce the unconditional moments") {
  std::mt19937_64 g(5);
  const auto w = normalize(sample_network(g, 6));
  Eigen::VectorXd mu(6), mu_r(6);
  mu << 1.0, 2.0, 0.5, 1.5, 0.8, 1.1;
  mu_r << 0.9, 1.7, 0.6, 1.2, 0.7, 1.0;
  const NheavyParams p{{0, 0.05, 0.05, 0.7}, {0, 0.3, 0.2, 0.4}};
  const auto c = targeting_intercepts(p, w, mu, mu_r);
  const auto [eh, emu] = unconditional_means(build_block_dynamics(p, c.returns, c.measure, w));
  CHECK((eh - mu).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((emu - mu_r).cwiseAbs().maxCoeff() < 1e-12);

  const NheavyParams z{{0, 0, 0, 0}, {0, 0, 0, 0}};
  CHECK((targeting_intercepts(z, w, mu, mu_r).returns - mu).norm() == 0.0);
  Eigen::VectorXd bad = mu;
  bad[2] = 0.0;
  CHECK_THROWS_AS(targeting_intercepts(p, w, bad, mu_r), InvalidInput);
}

TEST_CASE("innovation moments") {
  const InnovationSpec spec;
  CHECK(spec.kappa2_r() == doctest::Approx(3.0));
  CHECK(spec.kappa2_rm() == doctest::Approx(1.25));
  CHECK(spec.kappa2_cross() == doctest::Approx(1.0));

  InnovationSpec corr;
  corr.correlation = 0.6;
  // Monte Carlo oracle for E(eps eps_R) under the Gaussian copula
  std::mt19937_64 g(9);
  std::normal_distribution<double> z;
  double s = 0.0;
  const int reps = 400000;
  for (int k = 0; k < reps; ++k) {
    const double z1 = z(g), z2 = 0.6 * z1 + 0.8 * z(g);
    s += corr.returns.from_normal(z1) * corr.measure.from_normal(z2);
  }
  CHECK(corr.kappa2_cross() == doctest::Approx(s / reps).epsilon(0.02));
  CHECK(corr.kappa2_cross() > 1.0);

  InnovationSpec bad;
  bad.correlation = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("simulation") {
  const NheavyParams p{{0.05, 0.2, 0.1, 0.5}, {0.05, 0.3, 0.2, 0.3}};
  const auto w = normalize(gen_dyad(25, 4));
  const InnovationSpec innov;
  const auto a = simulate_nheavy(p, w, 50, innov, 100, 99);
  const auto b = simulate_nheavy(p, w, 50, innov, 100, 99);
  CHECK(a.panel.r2 == b.panel.r2);
  CHECK(a.panel.rm == b.panel.rm);
  CHECK((a.panel.r2.array() >= 0.0).all());

  InnovationSpec unit;
  unit.returns = {InnovationFamily::unit};
  const auto u = simulate_nheavy(p, w, 20, unit, 10, 1);
  CHECK(u.panel.r2 == u.latent.h);

  const NheavyParams explosive{{0.05, 0.2, 0.1, 0.5}, {0.05, 0.5, 0.3, 0.3}};
  CHECK_THROWS_AS(simulate_nheavy(explosive, w, 10, innov, 0, 1), InvalidInput);

  // long-run means match (I - B)^{-1} w
  const auto sim = simulate_nheavy(p, w, 20000, innov, 500, 5);
  const auto [eh, emu] = unconditional_means(build_block_dynamics(p, w));
  const Eigen::VectorXd mean_rm = sim.panel.rm.colwise().mean().transpose();
  const Eigen::VectorXd mean_r2 = sim.panel.r2.colwise().mean().transpose();
  CHECK((mean_rm.array() / emu.array() - 1.0).abs().maxCoeff() < 0.05);
  CHECK(std::abs(mean_r2.mean() / eh.mean() - 1.0) < 0.05);
}

TEST_CASE("stacked observations satisfy the VARMA(1,1) identity") {
  const NheavyParams p{{0.05, 0.2, 0.1, 0.5}, {0.05, 0.3, 0.2, 0.3}};
  const auto w = normalize(gen_sbm(12, 3, 8));
  const auto sim = simulate_nheavy(p, w, 200, InnovationSpec{}, 50, 17);
  const auto dyn = build_block_dynamics(p, w);
  const int n = 12;
  // y_t = w + B y_{t-1} + u_t - M u_{t-1}, u = y - (h, mu), M = diag(beta I, beta_r I)
  Eigen::VectorXd m(2 * n);
  m << Eigen::VectorXd::Constant(n, p.phi.beta), Eigen::VectorXd::Constant(n, p.phi_r.beta);
  double worst = 0.0;
  for (int t = 1; t < 200; ++t) {
    Eigen::VectorXd y(2 * n), y1(2 * n), u(2 * n), u1(2 * n);
    y << sim.panel.r2.row(t).transpose(), sim.panel.rm.row(t).transpose();
    y1 << sim.panel.r2.row(t - 1).transpose(), sim.panel.rm.row(t - 1).transpose();
    u << (sim.panel.r2.row(t) - sim.latent.h.row(t)).transpose(), (sim.panel.rm.row(t) - sim.latent.mu.row(t)).transpose();
    u1 << (sim.panel.r2.row(t - 1) - sim.latent.h.row(t - 1)).transpose(),
        (sim.panel.rm.row(t - 1) - sim.latent.mu.row(t - 1)).transpose();
    const Eigen::VectorXd resid = y - dyn.w - dyn.b * y1 - u + m.cwiseProduct(u1);
    worst = std::max(worst, resid.cwiseAbs().maxCoeff() / (1.0 + y.cwiseAbs().maxCoeff()));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(validate_params({{0.1, 0.1, 0.1, 0.9}, {0.1, 0.3, 0.3, 0.3}}));
  CHECK_THROWS_AS(validate_params({{0.1, 0.1, 0.1, 1.0}, {0.1, 0.3, 0.3, 0.3}}), InvalidInput);
  CHECK_THROWS_AS(validate_params({{0.1, -0.1, 0.1, 0.5}, {0.1, 0.3, 0.3, 0.3}}), InvalidInput);
  CHECK_THROWS_AS(validate_params({{0.1, 0.1, 0.1, 0.5}, {0.1, 0.4, 0.3, 0.3}}), InvalidInput);
  CHECK(in_targeting_region({0, 0.1, 0.2, 0.5}, 1.5));
  CHECK_FALSE(in_targeting_region({0, 0.1, 0.4, 0.5}, 1.5));
}
