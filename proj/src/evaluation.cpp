#include "nheavy/evaluation.hpp"

#include <cmath>
#include <limits>

#include "nheavy/errors.hpp"
#include "nheavy/parallel.hpp"
#include "nheavy/rng.hpp"

namespace nheavy {

double qlike(double r2, double sigma2, double floor) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InvalidInput("predicted variance must be positive");
  if (!(r2 >= 0.0) || !std::isfinite(r2)) throw InvalidInput("realized squared return must be nonnegative");
  const double ratio = std::max(r2, floor) / sigma2;
  return ratio - std::log(ratio) - 1.0;
}

void validate_ngarch(const EquationParams& theta) {
  for (double v : {theta.omega, theta.alpha, theta.lambda, theta.beta}) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput("network GARCH coefficients must be finite and nonnegative");
  }
  if (theta.alpha + theta.lambda + theta.beta >= 1.0) {
    throw InvalidInput("network GARCH requires alpha + lambda + beta < 1");
  }
}

RecursionLikelihood ngarch_likelihood(const NormalizedNetwork& w, const Panel& r2, InitRule rule) {
  return RecursionLikelihood::free_intercept(w, r2, r2, initial_state(r2, rule));
}

RecursionLikelihood ngarch_targeted_likelihood(const NormalizedNetwork& w, const Panel& r2, InitRule rule) {
  const Eigen::VectorXd mu = r2.colwise().mean().transpose();
  if ((mu.array() <= 0.0).any()) throw InvalidInput("mean squared return must be positive for every asset");
  return RecursionLikelihood::targeted(w, r2, r2, initial_state(r2, rule), {mu, mu, w.apply(mu), mu});
}

EquationParams default_ngarch_start(const Panel& r2) {
  const double mean = r2.size() ? r2.mean() : 1.0;
  return {std::max(mean, 1e-8) * 0.05, 0.05, 0.05, 0.85};
}

NgarchFit fit_ngarch(const Panel& r2, const NormalizedNetwork& w, Estimator estimator, const EquationParams& start,
                     const FitOptions& options) {
  if (r2.cols() != w.size()) throw InvalidInput("panel width does not match network size");
  if (!r2.allFinite() || (r2.array() < 0.0).any()) throw DataError("squared returns must be finite and nonnegative");
  const bool one = estimator == Estimator::one_step;
  const auto lik = one ? ngarch_likelihood(w, r2, options.init_rule) : ngarch_targeted_likelihood(w, r2, options.init_rule);
  Eigen::VectorXd x0(lik.dimension());
  if (one) {
    x0 << start.omega, start.alpha, start.lambda, start.beta;
  } else {
    x0 << start.alpha, start.lambda, start.beta;
    for (int k = 0; k < 60 && !lik.evaluate(x0, false).feasible; ++k) x0 *= 0.7;
  }
  const auto eq = fit_equation(lik, Region::simplex, x0, options.optimizer);

  NgarchFit fit;
  fit.estimator = estimator;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  fit.theta = one ? EquationParams{eq.theta[0], eq.theta[1], eq.theta[2], eq.theta[3]}
                  : EquationParams{nan, eq.theta[0], eq.theta[1], eq.theta[2]};
  fit.omega = lik.intercepts(eq.theta);
  fit.diagnostics = eq.diagnostics;
  const Panel h = lik.filtered(eq.theta);
  fit.h_next = h.row(h.rows() - 1).transpose();
  return fit;
}

Eigen::VectorXd ngarch_forecast(const EquationParams& theta, const Eigen::VectorXd& omega, const NormalizedNetwork& w,
                                const Eigen::VectorXd& h_next, int steps) {
  if (steps < 1) throw InvalidInput("forecast horizon must be >= 1");
  if (omega.size() != w.size() || h_next.size() != w.size()) throw InvalidInput("state has wrong length");
  Eigen::VectorXd h = h_next;
  for (int j = 1; j < steps; ++j) h = omega + (theta.alpha + theta.beta) * h + theta.lambda * w.apply(h);
  return h;
}

std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::nheavy:
      return "nheavy";
    case ModelKind::ngarch:
      return "ngarch";
    case ModelKind::perfect_foresight:
      return "perfect_foresight";
  }
  return "unknown";
}

std::string to_string(Protocol p) { return p == Protocol::rolling ? "rolling" : "fixed"; }

std::string to_string(Estimator e) { return e == Estimator::one_step ? "one_step" : "two_step"; }

std::string to_string(NetworkKind k) {
  switch (k) {
    case NetworkKind::dyad:
      return "dyad";
    case NetworkKind::powerlaw:
      return "powerlaw";
    case NetworkKind::sbm:
      return "sbm";
  }
  return "unknown";
}

std::string to_string(PipelineKind p) { return p == PipelineKind::full ? "full" : "direct"; }

namespace {

/// Fits a model on one window and forecasts `horizon` days past its last day.
class WindowForecaster {
 public:
  WindowForecaster(const NormalizedNetwork& w, const BacktestSpec& spec) : w_(w), spec_(spec) {}

  struct Fitted {
    NheavyParams nheavy;
    EquationParams ngarch;
    Eigen::VectorXd omega, omega_r;
    Eigen::VectorXd h_next, mu_next;
    bool converged = true;
  };

  Fitted fit(const PanelSeries& sample, const Fitted* start) const {
    Fitted out;
    if (spec_.model == ModelKind::nheavy) {
      NheavyParams init = start != nullptr                         ? start->nheavy
                          : spec_.estimator == Estimator::one_step ? default_one_step_start()
                                                                   : default_two_step_start();
      const auto f = spec_.estimator == Estimator::one_step ? fit_one_step(sample, w_, init, spec_.fit)
                                                            : fit_two_step(sample, w_, init, spec_.fit);
      out.nheavy = f.theta_hat;
      out.omega = f.omega;
      out.omega_r = f.omega_r;
      out.h_next = f.h_next;
      out.mu_next = f.mu_next;
      out.converged = f.converged();
    } else if (spec_.model == ModelKind::ngarch) {
      const EquationParams init = start != nullptr ? start->ngarch : default_ngarch_start(sample.r2);
      auto s = init;
      if (spec_.estimator == Estimator::one_step && !std::isfinite(s.omega)) s.omega = default_ngarch_start(sample.r2).omega;
      const auto f = fit_ngarch(sample.r2, w_, spec_.estimator, s, spec_.fit);
      out.ngarch = f.theta;
      out.omega = f.omega;
      out.h_next = f.h_next;
      out.converged = f.converged();
    }
    return out;
  }

  Eigen::VectorXd predict(const Fitted& f, const Eigen::VectorXd& h_next, const Eigen::VectorXd& mu_next) const {
    if (spec_.model == ModelKind::nheavy) {
      const auto dyn = build_block_dynamics(f.nheavy, f.omega, f.omega_r, w_);
      return forecast_from_next_state(dyn, h_next, mu_next, spec_.horizon).h;
    }
    return ngarch_forecast(f.ngarch, f.omega, w_, h_next, spec_.horizon);
  }

  /// Filtered next-day states over the whole panel with fixed parameters; row t is the state for day t.
  std::pair<Panel, Panel> states(const Fitted& f, const PanelSeries& panel, const PanelSeries& sample) const {
    const auto h_init = initial_state(sample.r2, spec_.fit.init_rule);
    if (spec_.model == ModelKind::nheavy) {
      const auto mu_init = initial_state(sample.rm, spec_.fit.init_rule);
      auto lat = filter(f.nheavy, f.omega, f.omega_r, w_, panel, h_init, mu_init);
      return {std::move(lat.h), std::move(lat.mu)};
    }
    const auto& t = f.ngarch;
    return {filter_equation(f.omega, t.alpha, t.lambda, t.beta, w_, panel.r2, h_init), Panel()};
  }

 private:
  const NormalizedNetwork& w_;
  const BacktestSpec& spec_;
};

}  // namespace

BacktestReport rolling_backtest(const PanelSeries& panel, const NormalizedNetwork& w, const BacktestSpec& spec) {
  panel.validate();
  if (panel.assets() != w.size()) throw InvalidInput("panel width does not match network size");
  if (spec.horizon < 1) throw InvalidInput("forecast horizon must be >= 1");
  if (spec.window < 2) throw InvalidInput("estimation window must be >= 2 days");
  if (spec.window + spec.horizon > panel.days()) throw InvalidInput("window plus horizon exceeds the sample length");

  const int n = panel.assets();
  const int origins = panel.days() - spec.window - spec.horizon + 1;
  BacktestReport report;
  report.model = spec.model;
  report.estimator = spec.estimator;
  report.protocol = spec.protocol;
  report.window = spec.window;
  report.horizon = spec.horizon;
  report.origins = origins;

  Panel losses(origins, n);
  std::vector<char> converged(origins, 1);
  auto target_row = [&](int k) { return k + spec.window - 1 + spec.horizon; };
  auto score = [&](int k, const Eigen::VectorXd& pred) {
    for (int i = 0; i < n; ++i) losses(k, i) = qlike(panel.r2(target_row(k), i), pred[i], spec.floor);
  };

  if (spec.model == ModelKind::perfect_foresight) {
    for (int k = 0; k < origins; ++k) {
      Eigen::VectorXd pred = panel.r2.row(target_row(k)).transpose().cwiseMax(spec.floor);
      score(k, pred);
    }
  } else {
    const WindowForecaster fc(w, spec);
    const auto first_sample = panel.slice(0, spec.window);
    const auto first = fc.fit(first_sample, nullptr);
    converged[0] = first.converged;
    if (spec.protocol == Protocol::fixed) {
      const auto [h, mu] = fc.states(first, panel, first_sample);
      for (int k = 0; k < origins; ++k) {
        const int next = k + spec.window;
        const Eigen::VectorXd mu_next = mu.size() ? Eigen::VectorXd(mu.row(next).transpose()) : Eigen::VectorXd();
        score(k, fc.predict(first, h.row(next).transpose(), mu_next));
      }
    } else {
      score(0, fc.predict(first, first.h_next, first.mu_next));
      parallel_for(origins - 1, spec.jobs, [&](int j) {
        const int k = j + 1;
        const auto f = fc.fit(panel.slice(k, spec.window), &first);
        converged[k] = f.converged;
        score(k, fc.predict(f, f.h_next, f.mu_next));
      });
    }
  }

  for (int k = 0; k < origins; ++k) {
    if (!converged[k]) ++report.unconverged_fits;
    for (int i = 0; i < n; ++i) {
      if (panel.r2(target_row(k), i) < spec.floor) ++report.floor_hits;
    }
  }
  report.per_asset = losses.colwise().mean().transpose();
  report.mean = report.per_asset.mean();
  return report;
}

AdjacencyMatrix generate_network(NetworkKind kind, int n, std::uint64_t seed, double powerlaw_alpha, int sbm_blocks) {
  switch (kind) {
    case NetworkKind::dyad:
      return gen_dyad(n, seed);
    case NetworkKind::powerlaw:
      return gen_powerlaw(n, powerlaw_alpha, seed);
    case NetworkKind::sbm:
      return gen_sbm(n, sbm_blocks, seed);
  }
  throw InvalidInput("unknown network generator");
}

Eigen::VectorXd harness_truth(const NheavyParams& theta0, Estimator estimator) {
  const auto& p = theta0.phi;
  const auto& q = theta0.phi_r;
  if (estimator == Estimator::one_step) {
    Eigen::VectorXd v(8);
    v << p.omega, p.alpha, p.lambda, p.beta, q.omega, q.alpha, q.lambda, q.beta;
    return v;
  }
  Eigen::VectorXd v(6);
  v << p.alpha, p.lambda, p.beta, q.alpha, q.lambda, q.beta;
  return v;
}

HarnessTable rmse_harness(const HarnessDesign& design, std::uint64_t seed) {
  if (design.q_reps < 1) throw InvalidInput("number of replications must be >= 1");
  if (design.n < 2) throw InvalidInput("harness needs at least two assets");
  if (design.t_len < 2) throw InvalidInput("harness needs at least two days");
  validate_params(design.theta0);

  HarnessTable table;
  table.truth = harness_truth(design.theta0, design.estimator);
  table.replications.resize(design.q_reps);
  const auto start = design.estimator == Estimator::one_step ? default_one_step_start() : default_two_step_start();

  parallel_for(design.q_reps, design.jobs, [&](int q) {
    auto& rep = table.replications[q];
    const std::uint64_t rep_seed = derive_seed(seed, static_cast<std::uint64_t>(q));
    try {
      const auto a = generate_network(design.generator, design.n, rep_seed, design.powerlaw_alpha, design.sbm_blocks);
      rep.density = density(a);
      const auto w = normalize(a);
      const PanelSeries panel =
          design.pipeline == PipelineKind::full
              ? simulate_pipeline(design.theta0, w, design.t_len, design.pipeline_spec, rep_seed).panel
              : simulate_nheavy(design.theta0, w, design.t_len, design.innovations, design.burn_in, rep_seed).panel;
      const auto fit = design.estimator == Estimator::one_step ? fit_one_step(panel, w, start, design.fit)
                                                               : fit_two_step(panel, w, start, design.fit);
      rep.estimate = fit.estimates();
      rep.std_errors = fit.std_errors;
      rep.converged = fit.converged();
      rep.ok = rep.estimate.allFinite();
      if (!rep.ok) rep.error = "non-finite estimate";
    } catch (const std::exception& e) {
      rep.ok = false;
      rep.error = e.what();
    }
  });

  const auto p = table.truth.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd sq_err = Eigen::VectorXd::Zero(p);
  double density_sum = 0.0;
  for (const auto& rep : table.replications) {
    if (!rep.ok) {
      ++table.failures;
      continue;
    }
    ++table.successes;
    if (!rep.converged) ++table.unconverged;
    sum += rep.estimate;
    sq_err += (rep.estimate - table.truth).cwiseAbs2();
    density_sum += rep.density;
  }
  table.labels = design.estimator == Estimator::one_step
                     ? std::vector<std::string>{"omega", "alpha", "lambda", "beta", "omega_r", "alpha_r", "lambda_r",
                                                "beta_r"}
                     : std::vector<std::string>{"alpha", "lambda", "beta", "alpha_r", "lambda_r", "beta_r"};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (table.successes == 0) {
    table.rmse = table.mean_estimate = table.mc_se = Eigen::VectorXd::Constant(p, nan);
    table.mean_density = nan;
    return table;
  }
  const double s = table.successes;
  table.rmse = (sq_err / s).cwiseSqrt();
  table.mean_estimate = sum / s;
  table.mean_density = density_sum / s;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(p);
  for (const auto& rep : table.replications) {
    if (rep.ok) var += (rep.estimate - table.mean_estimate).cwiseAbs2();
  }
  table.mc_se = table.successes > 1 ? Eigen::VectorXd((var / (s - 1.0) / s).cwiseSqrt()) : Eigen::VectorXd::Constant(p, nan);
  return table;
}

}  // namespace nheavy
