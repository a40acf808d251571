#include "nheavy/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace nheavy {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMaxStep = 2.0;  // cap on the largest coordinate move per line search

struct Point {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd g;
};

double max_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

OptimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const OptimizerConfig& config) {
  const auto n = x0.size();
  OptimizeResult res;
  Point cur;
  cur.x = std::move(x0);
  cur.g.resize(n);
  cur.f = f(cur.x, &cur.g);
  res.evaluations = 1;
  if (!std::isfinite(cur.f) || !cur.g.allFinite()) {
    res.x = cur.x;
    res.value = cur.f;
    res.gradient = cur.g;
    res.message = "objective not finite at starting point";
    return res;
  }

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool h_is_identity = true;
  int iter = 0;
  for (; iter < config.max_iterations; ++iter) {
    if (max_norm(cur.g) < config.gradient_tolerance) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      break;
    }
    Eigen::VectorXd dir = -h_inv * cur.g;
    double slope = cur.g.dot(dir);
    if (!(slope < 0.0)) {
      h_inv.setIdentity();
      h_is_identity = true;
      dir = -cur.g;
      slope = cur.g.dot(dir);
    }
    // without curvature information the gradient's size says nothing about the step length
    const double cap = kMaxStep / std::max(max_norm(dir), 1e-300);
    double step = h_is_identity ? cap : std::min(1.0, cap);

    Point next;
    next.g.resize(n);
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      next.x = cur.x + step * dir;
      next.f = f(next.x, &next.g);
      ++res.evaluations;
      if (std::isfinite(next.f) && next.f <= cur.f + kArmijo * step * slope && next.g.allFinite()) {
        accepted = true;
        break;
      }
      double shrink = 0.5;
      if (std::isfinite(next.f)) {
        // minimiser of the quadratic through f(0), f'(0) and f(step)
        const double denom = 2.0 * (next.f - cur.f - slope * step);
        if (denom > 0.0) shrink = std::clamp(-slope * step / denom, 0.1, 0.5);
      }
      step *= shrink;
    }
    if (!accepted) {
      if (!h_is_identity) {
        h_inv.setIdentity();
        h_is_identity = true;
        continue;
      }
      res.message = "line search failed";
      break;
    }

    const Eigen::VectorXd s = next.x - cur.x;
    const Eigen::VectorXd y = next.g - cur.g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (h_is_identity) h_inv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
      h_inv = (id - rho * s * y.transpose()) * h_inv * (id - rho * y * s.transpose()) + rho * s * s.transpose();
      h_is_identity = false;
    }
    cur = std::move(next);
  }
  if (iter == config.max_iterations && !res.converged) res.message = "iteration limit reached";
  res.iterations = iter;
  res.x = cur.x;
  res.value = cur.f;
  res.gradient = cur.g;
  if (!res.converged && max_norm(cur.g) < config.gradient_tolerance) res.converged = true;
  return res;
}

OptimizeResult minimize_nelder_mead(const Objective& f, Eigen::VectorXd x0, const OptimizerConfig& config,
                                    int max_iterations) {
  const auto n = x0.size();
  auto value = [&](const Eigen::VectorXd& x) {
    const double v = f(x, nullptr);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  std::vector<Eigen::VectorXd> simplex(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (Eigen::Index k = 0; k < n; ++k) simplex[k + 1][k] += 0.5;
  for (Eigen::Index k = 0; k <= n; ++k) fv[k] = value(simplex[k]);

  OptimizeResult res;
  res.evaluations = static_cast<int>(n + 1);
  std::vector<int> order(n + 1);
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int best = order.front();
    const int worst = order.back();
    const int second = order[n - 1];
    double size = 0.0;
    for (Eigen::Index k = 0; k <= n; ++k) size = std::max(size, max_norm(simplex[k] - simplex[best]));
    if (std::abs(fv[worst] - fv[best]) < 1e-14 * (1.0 + std::abs(fv[best])) && size < 1e-9) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k <= n; ++k) {
      if (k != worst) centroid += simplex[k];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd refl = centroid + (centroid - simplex[worst]);
    const double f_refl = value(refl);
    ++res.evaluations;
    if (f_refl < fv[best]) {
      const Eigen::VectorXd exp = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_exp = value(exp);
      ++res.evaluations;
      if (f_exp < f_refl) {
        simplex[worst] = exp;
        fv[worst] = f_exp;
      } else {
        simplex[worst] = refl;
        fv[worst] = f_refl;
      }
      continue;
    }
    if (f_refl < fv[second]) {
      simplex[worst] = refl;
      fv[worst] = f_refl;
      continue;
    }
    const bool outside = f_refl < fv[worst];
    const Eigen::VectorXd con =
        outside ? Eigen::VectorXd(centroid + 0.5 * (refl - centroid)) : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double f_con = value(con);
    ++res.evaluations;
    if (f_con < std::min(f_refl, fv[worst])) {
      simplex[worst] = con;
      fv[worst] = f_con;
      continue;
    }
    for (Eigen::Index k = 0; k <= n; ++k) {
      if (k == best) continue;
      simplex[k] = simplex[best] + 0.5 * (simplex[k] - simplex[best]);
      fv[k] = value(simplex[k]);
      ++res.evaluations;
    }
  }
  const auto best = std::min_element(fv.begin(), fv.end()) - fv.begin();
  res.iterations = iter;
  res.x = simplex[best];
  res.gradient.resize(n);
  res.value = f(res.x, &res.gradient);
  res.converged = std::isfinite(res.value) && max_norm(res.gradient) < config.gradient_tolerance;
  res.message = res.converged               ? "gradient tolerance reached"
                : iter == max_iterations ? "iteration limit reached"
                                         : "simplex collapsed";
  return res;
}

OptimizeResult minimize(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config) {
  auto res = minimize_bfgs(f, x0, config);
  if (res.converged || !config.nelder_mead_fallback || !std::isfinite(res.value)) return res;
  const int used = res.iterations;
  const int evals = res.evaluations;
  if (used >= config.max_iterations) return res;
  auto nm = minimize_nelder_mead(f, res.x, config, config.max_iterations - used);
  const Eigen::VectorXd start = nm.value < res.value ? nm.x : res.x;
  OptimizerConfig rest = config;
  rest.max_iterations = config.max_iterations - used - nm.iterations;
  if (rest.max_iterations <= 0) {
    if (nm.value >= res.value) return res;
    nm.iterations += used;
    nm.evaluations += evals;
    return nm;
  }
  auto polished = minimize_bfgs(f, start, rest);
  polished.iterations += used + nm.iterations;
  polished.evaluations += evals + nm.evaluations;
  if (polished.value > res.value && !polished.converged) {
    res.iterations = polished.iterations;
    res.evaluations = polished.evaluations;
    return res;
  }
  if (!polished.converged) polished.message = "no convergence after simplex fallback: " + polished.message;
  return polished;
}

}  // namespace nheavy
