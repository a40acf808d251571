#include "nheavy/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nheavy/errors.hpp"

namespace nheavy {

namespace {

Eigen::VectorXd to_vector(const EquationParams& p) {
  Eigen::VectorXd v(4);
  v << p.omega, p.alpha, p.lambda, p.beta;
  return v;
}

Eigen::VectorXd dynamic_part(const EquationParams& p) {
  Eigen::VectorXd v(3);
  v << p.alpha, p.lambda, p.beta;
  return v;
}

EquationParams from_vector(const Eigen::VectorXd& v) {
  if (v.size() == 4) return {v[0], v[1], v[2], v[3]};
  return {std::numeric_limits<double>::quiet_NaN(), v[0], v[1], v[2]};
}

QllValue to_qll(const RecursionLikelihood::Value& v) { return {v.value, v.per_day}; }

}  // namespace

RecursionLikelihood returns_likelihood(const NormalizedNetwork& w, const PanelSeries& panel, InitRule rule) {
  return RecursionLikelihood::free_intercept(w, panel.rm, panel.r2, initial_state(panel.r2, rule));
}

RecursionLikelihood measure_likelihood(const NormalizedNetwork& w, const PanelSeries& panel, InitRule rule) {
  return RecursionLikelihood::free_intercept(w, panel.rm, panel.rm, initial_state(panel.rm, rule));
}

QllValue qll_returns(const EquationParams& phi, const NormalizedNetwork& w, const PanelSeries& panel, InitRule rule) {
  return to_qll(returns_likelihood(w, panel, rule).evaluate(to_vector(phi), false));
}

QllValue qll_rm(const EquationParams& phi_r, const NormalizedNetwork& w, const PanelSeries& panel, InitRule rule) {
  return to_qll(measure_likelihood(w, panel, rule).evaluate(to_vector(phi_r), false));
}

Eigen::VectorXd score_returns(const EquationParams& phi, const NormalizedNetwork& w, const PanelSeries& panel,
                              InitRule rule) {
  return returns_likelihood(w, panel, rule).evaluate(to_vector(phi), true).gradient;
}

Eigen::VectorXd score_rm(const EquationParams& phi_r, const NormalizedNetwork& w, const PanelSeries& panel,
                         InitRule rule) {
  return measure_likelihood(w, panel, rule).evaluate(to_vector(phi_r), true).gradient;
}

Eigen::VectorXd ParameterMap::to_natural(const Eigen::VectorXd& x) const {
  Eigen::VectorXd theta(dimension());
  const int off = has_omega_ ? 1 : 0;
  if (has_omega_) theta[0] = std::exp(x[0]);
  if (region_ == Region::persistence_below_one) {
    theta[off] = std::exp(x[off]);
    theta[off + 1] = std::exp(x[off + 1]);
    theta[off + 2] = 1.0 / (1.0 + std::exp(-x[off + 2]));
  } else {
    const double m = std::max({0.0, x[off], x[off + 1], x[off + 2]});
    double total = std::exp(-m);
    for (int k = 0; k < 3; ++k) {
      theta[off + k] = std::exp(x[off + k] - m);
      total += theta[off + k];
    }
    for (int k = 0; k < 3; ++k) theta[off + k] /= total;
  }
  return theta;
}

Eigen::MatrixXd ParameterMap::jacobian(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd theta = to_natural(x);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dimension(), dimension());
  const int off = has_omega_ ? 1 : 0;
  if (has_omega_) jac(0, 0) = theta[0];
  if (region_ == Region::persistence_below_one) {
    jac(off, off) = theta[off];
    jac(off + 1, off + 1) = theta[off + 1];
    jac(off + 2, off + 2) = theta[off + 2] * (1.0 - theta[off + 2]);
  } else {
    for (int k = 0; k < 3; ++k) {
      for (int j = 0; j < 3; ++j) {
        jac(off + k, off + j) = theta[off + k] * ((k == j ? 1.0 : 0.0) - theta[off + j]);
      }
    }
  }
  return jac;
}

Eigen::VectorXd ParameterMap::from_natural(const Eigen::VectorXd& theta) const {
  if (theta.size() != dimension()) throw InvalidInput("parameter vector has wrong dimension");
  Eigen::VectorXd x(dimension());
  const int off = has_omega_ ? 1 : 0;
  if (has_omega_) x[0] = std::log(std::max(theta[0], 1e-12));
  if (region_ == Region::persistence_below_one) {
    x[off] = std::log(std::max(theta[off], 1e-10));
    x[off + 1] = std::log(std::max(theta[off + 1], 1e-10));
    const double b = std::clamp(theta[off + 2], 1e-10, 1.0 - 1e-10);
    x[off + 2] = std::log(b / (1.0 - b));
  } else {
    Eigen::Vector3d v;
    for (int k = 0; k < 3; ++k) v[k] = std::max(theta[off + k], 1e-10);
    const double s = v.sum();
    if (s > 1.0 - 1e-6) v *= (1.0 - 1e-6) / s;
    const double slack = 1.0 - v.sum();
    for (int k = 0; k < 3; ++k) x[off + k] = std::log(v[k] / slack);
  }
  return x;
}

EquationFit fit_equation(const RecursionLikelihood& lik, Region region, const Eigen::VectorXd& start,
                         const OptimizerConfig& config) {
  const ParameterMap map(!lik.is_targeted(), region);
  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const Eigen::VectorXd theta = map.to_natural(x);
    const auto v = lik.evaluate(theta, grad != nullptr);
    if (grad != nullptr) {
      *grad = v.feasible ? Eigen::VectorXd(map.jacobian(x).transpose() * v.gradient)
                         : Eigen::VectorXd::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
    }
    return v.value;
  };
  const auto res = minimize(objective, map.from_natural(start), config);

  EquationFit fit;
  fit.theta = map.to_natural(res.x);
  fit.diagnostics.converged = res.converged;
  fit.diagnostics.iterations = res.iterations;
  fit.diagnostics.evaluations = res.evaluations;
  fit.diagnostics.gradient_norm = res.gradient.size() ? res.gradient.cwiseAbs().maxCoeff() : 0.0;
  fit.diagnostics.message = res.message;
  fit.diagnostics.qll = to_qll(lik.evaluate(fit.theta, false));
  return fit;
}

Eigen::VectorXd FitResult::estimates() const {
  if (estimator == Estimator::one_step) {
    Eigen::VectorXd v(8);
    v << to_vector(theta_hat.phi), to_vector(theta_hat.phi_r);
    return v;
  }
  Eigen::VectorXd v(6);
  v << dynamic_part(theta_hat.phi), dynamic_part(theta_hat.phi_r);
  return v;
}

NheavyParams default_one_step_start() { return {{0.005, 0.001, 0.001, 0.9}, {0.005, 0.1, 0.1, 0.5}}; }

NheavyParams default_two_step_start() {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {{nan, 0.01, 0.001, 0.7}, {nan, 0.001, 0.01, 0.85}};
}

MomentTargets moment_targets(const PanelSeries& panel) {
  MomentTargets m;
  m.mu = panel.r2.colwise().mean().transpose();
  m.mu_r = panel.rm.colwise().mean().transpose();
  for (Eigen::Index i = 0; i < m.mu.size(); ++i) {
    if (!(m.mu[i] > 0.0)) throw InvalidInput("mean squared return of asset " + std::to_string(i) + " is not positive");
    if (!(m.mu_r[i] > 0.0)) {
      throw InvalidInput("mean realized measure of asset " + std::to_string(i) + " is not positive");
    }
  }
  m.kappa = m.mu_r.cwiseQuotient(m.mu);
  return m;
}

namespace {

void check_fit_inputs(const PanelSeries& panel, const NormalizedNetwork& w) {
  panel.validate();
  if (panel.assets() != w.size()) throw InvalidInput("panel width does not match network size");
  if (panel.days() < 2) throw InvalidInput("estimation needs at least two days");
}

std::pair<RecursionLikelihood, RecursionLikelihood> targeted_likelihoods(const NormalizedNetwork& w,
                                                                         const PanelSeries& panel,
                                                                         const MomentTargets& m, InitRule rule) {
  const Eigen::VectorXd net = w.apply(m.mu_r);
  auto r = RecursionLikelihood::targeted(w, panel.rm, panel.r2, initial_state(panel.r2, rule),
                                         {m.mu, m.mu_r, net, m.mu});
  auto q = RecursionLikelihood::targeted(w, panel.rm, panel.rm, initial_state(panel.rm, rule),
                                         {m.mu_r, m.mu_r, net, m.mu_r});
  return {std::move(r), std::move(q)};
}

/// Pulls an infeasible targeted starting point toward small coefficients.
Eigen::VectorXd feasible_start(const RecursionLikelihood& lik, Eigen::VectorXd theta) {
  for (int k = 0; k < 60; ++k) {
    if (lik.evaluate(theta, false).feasible) return theta;
    theta[0] *= 0.5;
    theta[1] *= 0.5;
    theta[2] *= 0.9;
  }
  throw InvalidInput("no feasible starting point for the targeted likelihood");
}

void finish(FitResult& fit, const RecursionLikelihood& r, const RecursionLikelihood& q, const Eigen::VectorXd& theta_r,
            const Eigen::VectorXd& theta_q, const PanelSeries& panel, const NormalizedNetwork& w,
            const FitOptions& options) {
  fit.omega = r.intercepts(theta_r);
  fit.omega_r = q.intercepts(theta_q);
  const Panel h = r.filtered(theta_r);
  const Panel mu = q.filtered(theta_q);
  fit.h_next = h.row(h.rows() - 1).transpose();
  fit.mu_next = mu.row(mu.rows() - 1).transpose();
  if (!fit.returns.converged) fit.warnings.push_back("return equation did not converge: " + fit.returns.message);
  if (!fit.measure.converged) fit.warnings.push_back("realized-measure equation did not converge: " + fit.measure.message);
  if (options.compute_covariance) {
    if (!fit.converged()) fit.warnings.push_back("covariance evaluated at an unconverged estimate");
    auto s = sandwich_covariance(fit, panel, w, options.init_rule);
    fit.cov = std::move(s.cov);
    fit.std_errors = std::move(s.std_errors);
    fit.kappa2 = s.kappa2;
    if (s.pseudo_inverse) fit.warnings.push_back("singular information matrix; pseudo-inverse used");
  }
}

}  // namespace

FitResult fit_one_step(const PanelSeries& panel, const NormalizedNetwork& w, const NheavyParams& init_guess,
                       const FitOptions& options) {
  check_fit_inputs(panel, w);
  const auto r = returns_likelihood(w, panel, options.init_rule);
  const auto q = measure_likelihood(w, panel, options.init_rule);
  // The two equations share no parameters, so they are minimised separately.
  const auto fr = fit_equation(r, Region::persistence_below_one, to_vector(init_guess.phi), options.optimizer);
  const auto fq = fit_equation(q, Region::simplex, to_vector(init_guess.phi_r), options.optimizer);

  FitResult fit;
  fit.estimator = Estimator::one_step;
  fit.theta_hat = {from_vector(fr.theta), from_vector(fq.theta)};
  fit.returns = fr.diagnostics;
  fit.measure = fq.diagnostics;
  fit.labels = {"omega", "alpha", "lambda", "beta", "omega_r", "alpha_r", "lambda_r", "beta_r"};
  fit.covariance_label = "sandwich";
  finish(fit, r, q, fr.theta, fq.theta, panel, w, options);
  return fit;
}

FitResult fit_two_step(const PanelSeries& panel, const NormalizedNetwork& w, const NheavyParams& init_guess,
                       const FitOptions& options) {
  check_fit_inputs(panel, w);
  const auto moments = moment_targets(panel);
  const auto [r, q] = targeted_likelihoods(w, panel, moments, options.init_rule);
  const auto fr = fit_equation(r, Region::persistence_below_one, feasible_start(r, dynamic_part(init_guess.phi)),
                               options.optimizer);
  const auto fq = fit_equation(q, Region::simplex, feasible_start(q, dynamic_part(init_guess.phi_r)), options.optimizer);

  FitResult fit;
  fit.estimator = Estimator::two_step;
  fit.theta_hat = {from_vector(fr.theta), from_vector(fq.theta)};
  fit.returns = fr.diagnostics;
  fit.measure = fq.diagnostics;
  fit.moments = moments;
  fit.labels = {"alpha", "lambda", "beta", "alpha_r", "lambda_r", "beta_r"};
  fit.covariance_label = "sandwich (moment-plug-in, not HAC-corrected)";
  finish(fit, r, q, fr.theta, fq.theta, panel, w, options);
  return fit;
}

SandwichResult sandwich_covariance(const FitResult& fit, const PanelSeries& panel, const NormalizedNetwork& w,
                                   InitRule rule) {
  RecursionLikelihood::Contributions cr, cq;
  if (fit.estimator == Estimator::one_step) {
    cr = returns_likelihood(w, panel, rule).contributions(to_vector(fit.theta_hat.phi));
    cq = measure_likelihood(w, panel, rule).contributions(to_vector(fit.theta_hat.phi_r));
  } else {
    if (!fit.moments) throw InvalidInput("two-step fit is missing its moment targets");
    const auto [r, q] = targeted_likelihoods(w, panel, *fit.moments, rule);
    cr = r.contributions(dynamic_part(fit.theta_hat.phi));
    cq = q.contributions(dynamic_part(fit.theta_hat.phi_r));
  }
  const double count = static_cast<double>(cr.ratio.size());
  const Eigen::MatrixXd s_r = cr.scaled_gradient.transpose() * cr.scaled_gradient / count;
  const Eigen::MatrixXd s_q = cq.scaled_gradient.transpose() * cq.scaled_gradient / count;
  const Eigen::MatrixXd s_rq = cr.scaled_gradient.transpose() * cq.scaled_gradient / count;

  SandwichResult out;
  out.kappa2.r = cr.ratio.squaredNorm() / count;
  out.kappa2.rm = cq.ratio.squaredNorm() / count;
  out.kappa2.cross = cr.ratio.dot(cq.ratio) / count;

  const auto pr = s_r.rows();
  const auto pq = s_q.rows();
  out.information = Eigen::MatrixXd::Zero(pr + pq, pr + pq);
  out.information.topLeftCorner(pr, pr) = s_r;
  out.information.bottomRightCorner(pq, pq) = s_q;
  out.outer.resize(pr + pq, pr + pq);
  out.outer.topLeftCorner(pr, pr) = (out.kappa2.r - 1.0) * s_r;
  out.outer.bottomRightCorner(pq, pq) = (out.kappa2.rm - 1.0) * s_q;
  out.outer.topRightCorner(pr, pq) = (out.kappa2.cross - 1.0) * s_rq;
  out.outer.bottomLeftCorner(pq, pr) = (out.kappa2.cross - 1.0) * s_rq.transpose();

  Eigen::MatrixXd inv;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(out.information);
  if (lu.isInvertible() && lu.rcond() > 1e-14) {
    inv = lu.inverse();
  } else {
    inv = out.information.completeOrthogonalDecomposition().pseudoInverse();
    out.pseudo_inverse = true;
  }
  const double scale = static_cast<double>(panel.assets()) * panel.days();
  out.cov = inv * out.outer * inv.transpose() / scale;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.std_errors = out.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

}  // namespace nheavy
