// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nheavy/estimation.hpp"
#include "nheavy/evaluation.hpp"
#include "nheavy/model.hpp"
#include "nheavy/network.hpp"
#include "nheavy/realized.hpp"
#include "nheavy/rng.hpp"

using namespace nheavy;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

NheavyParams random_params(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NheavyParams p;
  p.phi = {0.01 + 0.1 * u(g), 0.05 + 0.3 * u(g), 0.05 + 0.3 * u(g), 0.1 + 0.8 * u(g)};
  const double a = 0.1 + u(g), l = 0.1 + u(g), b = 0.1 + u(g);
  const double scale = (0.2 + 0.7 * u(g)) / (a + l + b);
  p.phi_r = {0.01 + 0.1 * u(g), a * scale, l * scale, b * scale};
  return p;
}

AdjacencyMatrix random_network(std::mt19937_64& g, int n) {
  std::bernoulli_distribution coin(0.3);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && coin(g)) edges.emplace_back(i, j);
    }
  }
  return AdjacencyMatrix::from_edges(n, edges);
}

Eigen::MatrixXd row_normalized_dense(const AdjacencyMatrix& a) {
  Eigen::MatrixXd d = a.to_dense();
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double deg = d.row(i).sum();
    if (deg > 0) d.row(i) /= deg;
  }
  return d;
}

Panel direct_sum(const EquationParams& e, const Eigen::MatrixXd& w, const Panel& d, const Eigen::VectorXd& init) {
  Panel x(d.rows(), d.cols());
  for (Eigen::Index t = 0; t < d.rows(); ++t) {
    for (Eigen::Index i = 0; i < d.cols(); ++i) {
      double s = std::pow(e.beta, static_cast<double>(t)) * init[i];
      for (Eigen::Index k = 1; k <= t; ++k) {
        double net = 0.0;
        for (Eigen::Index j = 0; j < d.cols(); ++j) net += w(i, j) * d(t - k, j);
        s += std::pow(e.beta, static_cast<double>(k - 1)) * (e.omega + e.alpha * d(t - k, i) + e.lambda * net);
      }
      x(t, i) = s;
    }
  }
  return x;
}

Outcome recursion_identity() {
  std::mt19937_64 g(101);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + static_cast<int>(g() % 10);
    const int t = 2 + static_cast<int>(g() % 49);
    const auto p = random_params(g);
    const auto a = random_network(g, n);
    PanelSeries panel{Panel(t, n), Panel(t, n)};
    for (int s = 0; s < t; ++s) {
      for (int i = 0; i < n; ++i) {
        panel.r2(s, i) = u(g);
        panel.rm(s, i) = u(g);
      }
    }
    Eigen::VectorXd h0(n), m0(n);
    for (int i = 0; i < n; ++i) {
      h0[i] = u(g);
      m0[i] = u(g);
    }
    const auto lat = filter(p, normalize(a), panel, h0, m0);
    const auto wd = row_normalized_dense(a);
    const Panel eh = direct_sum(p.phi, wd, panel.rm, h0);
    const Panel em = direct_sum(p.phi_r, wd, panel.rm, m0);
    worst = std::max(worst, ((lat.h - eh).array().abs() / eh.array().abs()).maxCoeff());
    worst = std::max(worst, ((lat.mu - em).array().abs() / em.array().abs()).maxCoeff());
  }
  return {worst < 1e-10, "max relative error " + fmt("%.3e", worst) + " over 100 instances"};
}

Outcome forecast_identity() {
  std::mt19937_64 g(202);
  double worst_power = 0.0, worst_forecast = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 1 + static_cast<int>(g() % 10);
    const auto p = random_params(g);
    const auto w = normalize(random_network(g, n));
    const auto dyn = build_block_dynamics(p, w);
    Eigen::MatrixXd naive = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    for (int j = 0; j <= 10; ++j) {
      if (j > 0) naive = naive * dyn.b;
      worst_power = std::max(worst_power, (b_power(dyn, j) - naive).cwiseAbs().maxCoeff());
    }
    Eigen::VectorXd x(2 * n);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int i = 0; i < 2 * n; ++i) x[i] = u(g);
    Eigen::VectorXd it = x;
    for (int s = 0; s <= 10; ++s) {
      it = dyn.w + dyn.b * it;
      const auto f = forecast(dyn, x.head(n), x.tail(n), s);
      worst_forecast = std::max(worst_forecast, (f.h - it.head(n)).cwiseAbs().maxCoeff());
      worst_forecast = std::max(worst_forecast, (f.mu - it.tail(n)).cwiseAbs().maxCoeff());
    }
  }
  return {worst_power < 1e-10 && worst_forecast < 1e-10,
          "B^J error " + fmt("%.3e", worst_power) + ", multistep error " + fmt("%.3e", worst_forecast)};
}

Eigen::VectorXd central_difference(const std::function<double(const EquationParams&)>& f, const EquationParams& e) {
  Eigen::Vector4d theta(e.omega, e.alpha, e.lambda, e.beta);
  Eigen::VectorXd g(4);
  for (int k = 0; k < 4; ++k) {
    const double h = 1e-6 * std::max(std::abs(theta[k]), 1e-2);
    Eigen::Vector4d up = theta, dn = theta;
    up[k] += h;
    dn[k] -= h;
    g[k] = (f({up[0], up[1], up[2], up[3]}) - f({dn[0], dn[1], dn[2], dn[3]})) / (2 * h);
  }
  return g;
}

Outcome score_correctness() {
  std::mt19937_64 g(303);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(g() % 8);
    const auto truth = random_params(g);
    const auto w = normalize(random_network(g, n));
    const auto panel = simulate_nheavy(truth, w, 150, InnovationSpec{}, 50, g()).panel;
    const auto at = random_params(g);
    const Eigen::VectorXd sr = score_returns(at.phi, w, panel);
    const Eigen::VectorXd fr =
        central_difference([&](const EquationParams& e) { return qll_returns(e, w, panel).value; }, at.phi);
    const Eigen::VectorXd sm = score_rm(at.phi_r, w, panel);
    const Eigen::VectorXd fm =
        central_difference([&](const EquationParams& e) { return qll_rm(e, w, panel).value; }, at.phi_r);
    worst = std::max(worst, (sr - fr).cwiseAbs().maxCoeff() / fr.cwiseAbs().maxCoeff());
    worst = std::max(worst, (sm - fm).cwiseAbs().maxCoeff() / fm.cwiseAbs().maxCoeff());
  }
  return {worst < 1e-5, "max relative gradient error " + fmt("%.3e", worst) + " at 50 points"};
}

const NheavyParams kInterior{{0.05, 0.3, 0.2, 0.5}, {0.05, 0.3, 0.2, 0.4}};

HarnessDesign direct_design(int t_len, int q_reps, bool covariance) {
  HarnessDesign d;
  d.generator = NetworkKind::dyad;
  d.n = 25;
  d.t_len = t_len;
  d.theta0 = kInterior;
  d.q_reps = q_reps;
  d.pipeline = PipelineKind::direct;
  d.burn_in = 500;
  d.fit.compute_covariance = covariance;
  return d;
}

Outcome qmle_consistency() {
  const auto short_run = rmse_harness(direct_design(100, 100, false), 404);
  const auto long_run = rmse_harness(direct_design(500, 100, false), 405);
  bool shrinks = true, centred = true;
  std::string detail;
  for (std::size_t k = 0; k < long_run.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double z = (long_run.mean_estimate[i] - long_run.truth[i]) / long_run.mc_se[i];
    shrinks = shrinks && long_run.rmse[i] < short_run.rmse[i];
    centred = centred && std::abs(z) < 3.0;
    detail += long_run.labels[k] + " " + fmt("%.3g", short_run.rmse[i]) + "->" + fmt("%.3g", long_run.rmse[i]) +
              " (z " + fmt("%.2f", z) + ") ";
  }
  detail += "failures " + std::to_string(short_run.failures + long_run.failures);
  return {shrinks && centred && short_run.successes == 100 && long_run.successes == 100, detail};
}

Outcome sandwich_coverage() {
  const auto t = rmse_harness(direct_design(500, 300, true), 505);
  const auto p = t.truth.size();
  Eigen::VectorXd covered = Eigen::VectorXd::Zero(p);
  int used = 0;
  for (const auto& rep : t.replications) {
    if (!rep.ok || rep.std_errors.size() != p || !rep.std_errors.allFinite()) continue;
    ++used;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (std::abs(rep.estimate[k] - t.truth[k]) <= 1.959963984540054 * rep.std_errors[k]) covered[k] += 1.0;
    }
  }
  bool pass = used > 0;
  std::string detail;
  for (Eigen::Index k = 0; k < p; ++k) {
    const double c = used ? covered[k] / used : 0.0;
    pass = pass && c >= 0.90 && c <= 0.99;
    detail += t.labels[static_cast<std::size_t>(k)] + " " + fmt("%.3f", c) + " ";
  }
  detail += "over " + std::to_string(used) + " replications";
  return {pass, detail};
}

Outcome pipeline_rmse() {
  HarnessDesign d;
  d.generator = NetworkKind::dyad;
  d.n = 25;
  d.t_len = 100;
  d.theta0 = default_one_step_start();
  d.q_reps = 100;
  d.pipeline = PipelineKind::full;
  d.pipeline_spec.m_ticks = 390;
  d.fit.compute_covariance = false;
  const auto t = rmse_harness(d, 606);
  // reported RMSEs for N = 25, T = 100, m = 390
  const std::array<double, 8> reported = {5.949e-04, 4.694e-05, 4.372e-05, 2.318e-07,
                                          4.989e-03, 7.352e-02, 5.669e-02, 2.185e-02};
  bool pass = t.successes > 0;
  std::string detail;
  for (int k = 0; k < 8; ++k) {
    const double ratio = t.rmse[k] / reported[k];
    pass = pass && ratio >= 0.1 && ratio <= 10.0;
    detail += t.labels[k] + " " + fmt("%.3e", t.rmse[k]) + " (x" + fmt("%.3g", ratio) + ") ";
  }
  detail += "ND " + fmt("%.1f", 100.0 * t.mean_density) + "% vs reported 20.8% (generator follows its stated law)";
  return {pass, detail};
}

Outcome realized_noise() {
  const double tau = 4e-4;
  const int m = 390, days = 1000;
  const auto spec = make_diffusion_spec(Eigen::VectorXd::Constant(1, tau), 0.5, 0.001);
  const auto clean = simulate_diffusion(spec, days, m, 707);
  const auto noisy = add_noise(clean, 0.001, 708);
  const int k = default_msrv_scales(m);
  double ms = 0.0, rv = 0.0;
  for (int l = 0; l < days; ++l) {
    ms += multiscale_rv(noisy, l, 0, k);
    rv += rv_naive(noisy, l, 0);
  }
  ms /= days;
  rv /= days;
  // integrated variance over the M - 1 within-day increments
  const double iv = tau * (m - 1.0) / m;
  const double rel = std::abs(ms - iv) / iv;
  return {std::abs(ms - iv) < std::abs(rv - iv) && rel < 0.05,
          "IV " + fmt("%.4e", iv) + ", MSRV " + fmt("%.4e", ms) + " (bias " + fmt("%.2f", 100 * rel) + "%), RV " +
              fmt("%.4e", rv)};
}

Outcome forecast_direction() {
  const std::array<int, 4> groups = {2, 3, 3, 10};
  const auto w = normalize(group_network(groups));
  const NheavyParams theta{{0.01, 0.4, 0.2, 0.3}, {0.02, 0.4, 0.3, 0.25}};
  int wins = 0, reps = 50;
  double gain = 0.0;
  for (int q = 0; q < reps; ++q) {
    const auto sim = simulate_nheavy(theta, w, 487, InnovationSpec{}, 500, derive_seed(808, static_cast<std::uint64_t>(q)));
    BacktestSpec spec;
    spec.window = 367;
    spec.horizon = 1;
    spec.model = ModelKind::nheavy;
    const auto a = rolling_backtest(sim.panel, w, spec);
    spec.model = ModelKind::ngarch;
    const auto b = rolling_backtest(sim.panel, w, spec);
    if (a.mean < b.mean) ++wins;
    gain += b.mean - a.mean;
  }
  const double share = static_cast<double>(wins) / reps;
  return {share >= 0.60, "one-step forecasts beat network GARCH in " + std::to_string(wins) + "/" +
                             std::to_string(reps) + " replications, mean QLIKE gain " + fmt("%.4f", gain / reps)};
}

Outcome qlike_units() {
  double worst = 0.0;
  for (double x : {1e-6, 0.01, 0.5, 1.0, 3.0, 250.0}) {
    worst = std::max(worst, std::abs(qlike(x, x)));
    worst = std::max(worst, std::abs(qlike(2 * x, x) - (1.0 - std::log(2.0))));
  }
  return {worst < 1e-12, "max deviation " + fmt("%.3e", worst)};
}

Outcome generator_density() {
  const int n = 25, seeds = 2000;
  struct Case {
    std::string name;
    std::function<AdjacencyMatrix(std::uint64_t)> make;
    double expected;
  };
  const std::vector<Case> cases = {
      {"dyad", [&](std::uint64_t s) { return gen_dyad(n, s); }, dyad_expected_density(n)},
      {"powerlaw", [&](std::uint64_t s) { return gen_powerlaw(n, 2.0, s); }, powerlaw_expected_density(n, 2.0)},
      {"sbm", [&](std::uint64_t s) { return gen_sbm(n, 5, s); }, sbm_expected_density(n, 5)},
  };
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    double sum = 0.0, sq = 0.0;
    for (int s = 0; s < seeds; ++s) {
      const double d = density(c.make(derive_seed(909, static_cast<std::uint64_t>(s))));
      sum += d;
      sq += d * d;
    }
    const double mean = sum / seeds;
    const double se = std::sqrt((sq / seeds - mean * mean) / (seeds - 1));
    const double z = (mean - c.expected) / se;
    pass = pass && std::abs(z) < 4.0;
    detail += c.name + " " + fmt("%.4f", mean) + " vs " + fmt("%.4f", c.expected) + " (z " + fmt("%.2f", z) + ") ";
  }
  return {pass, detail};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria = {
      {"recursion identity", recursion_identity},
      {"forecast identity", forecast_identity},
      {"score correctness", score_correctness},
      {"qmle consistency", qmle_consistency},
      {"sandwich coverage", sandwich_coverage},
      {"full-pipeline rmse magnitudes", pipeline_rmse},
      {"realized-measure noise robustness", realized_noise},
      {"forecast-evaluation direction", forecast_direction},
      {"qlike unit values", qlike_units},
      {"generator statistics", generator_density},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
