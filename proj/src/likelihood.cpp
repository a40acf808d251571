#include "nheavy/likelihood.hpp"

#include <cmath>
#include <limits>

#include "nheavy/errors.hpp"

namespace nheavy {

Eigen::VectorXd initial_state(const Panel& series, InitRule rule) {
  const auto t_len = series.rows();
  if (t_len < 1) throw InvalidInput("cannot initialise from an empty series");
  if (rule == InitRule::sample_mean) return series.colwise().mean().transpose();
  const double root = std::sqrt(static_cast<double>(t_len));
  const auto head = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(root)));
  return series.topRows(head).colwise().sum().transpose() / root;
}

RecursionLikelihood::RecursionLikelihood(const NormalizedNetwork& w, const Panel& driver, const Panel& target,
                                         Eigen::VectorXd init)
    : driver_(driver), network_driver_(w.apply_rows(driver)), target_(target), init_(std::move(init)) {
  if (driver.rows() != target.rows() || driver.cols() != target.cols()) {
    throw InvalidInput("driver and target panels differ in shape");
  }
  if (driver.cols() != w.size()) throw InvalidInput("panel width does not match network size");
  if (driver.rows() < 2) throw InvalidInput("quasi-likelihood needs at least two days");
  if (init_.size() != w.size()) throw InvalidInput("initial state has wrong length");
  if ((init_.array() <= 0.0).any() || !init_.allFinite()) {
    throw InvalidInput("initial state must be strictly positive");
  }
  if (!driver.allFinite() || !target.allFinite()) throw DataError("panel contains non-finite values");
}

RecursionLikelihood RecursionLikelihood::free_intercept(const NormalizedNetwork& w, const Panel& driver,
                                                        const Panel& target, Eigen::VectorXd init) {
  return RecursionLikelihood(w, driver, target, std::move(init));
}

RecursionLikelihood RecursionLikelihood::targeted(const NormalizedNetwork& w, const Panel& driver, const Panel& target,
                                                  Eigen::VectorXd init, TargetedIntercept intercept) {
  RecursionLikelihood r(w, driver, target, std::move(init));
  const auto n = w.size();
  if (intercept.base.size() != n || intercept.a.size() != n || intercept.l.size() != n || intercept.b.size() != n) {
    throw InvalidInput("targeted intercept vectors have wrong length");
  }
  r.targeted_ = true;
  r.intercept_ = std::move(intercept);
  return r;
}

Eigen::VectorXd RecursionLikelihood::intercepts(const Eigen::VectorXd& theta) const {
  if (theta.size() != dimension()) throw InvalidInput("parameter vector has wrong dimension");
  if (!targeted_) return Eigen::VectorXd::Constant(assets(), theta[0]);
  return intercept_.base - theta[0] * intercept_.a - theta[1] * intercept_.l - theta[2] * intercept_.b;
}

template <typename Visit>
bool RecursionLikelihood::run(const Eigen::VectorXd& theta, bool with_derivs, Visit&& visit) const {
  const int n = assets();
  const int p = dimension();
  const int off = targeted_ ? 0 : 1;  // position of alpha in theta
  const double alpha = theta[off];
  const double lambda = theta[off + 1];
  const double beta = theta[off + 2];
  const Eigen::VectorXd c = intercepts(theta);
  if (!c.allFinite() || (c.array() <= 0.0).any()) return false;

  // dc_i/dtheta
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(n, p);
  if (targeted_) {
    dc.col(0) = -intercept_.a;
    dc.col(1) = -intercept_.l;
    dc.col(2) = -intercept_.b;
  } else {
    dc.col(0).setOnes();
  }

  Eigen::VectorXd x = init_;
  Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(n, p);
  Eigen::VectorXd grad_row(p);
  for (int t = 1; t < days(); ++t) {
    for (int i = 0; i < n; ++i) {
      const double prev = x[i];
      const double d = driver_(t - 1, i);
      const double nd = network_driver_(t - 1, i);
      const double xi = c[i] + alpha * d + lambda * nd + beta * prev;
      if (!(xi > 0.0)) return false;
      if (with_derivs) {
        for (int k = 0; k < p; ++k) grad_row[k] = dc(i, k) + beta * dx(i, k);
        grad_row[off] += d;
        grad_row[off + 1] += nd;
        grad_row[off + 2] += prev;
        dx.row(i) = grad_row.transpose();
      }
      x[i] = xi;
      visit(t, i, xi, dx.row(i));
    }
  }
  return true;
}

RecursionLikelihood::Value RecursionLikelihood::evaluate(const Eigen::VectorXd& theta, bool with_gradient) const {
  if (theta.size() != dimension()) throw InvalidInput("parameter vector has wrong dimension");
  const int n = assets();
  const double inv_n = 1.0 / n;
  Value out;
  out.per_day = Eigen::VectorXd::Zero(days() - 1);
  out.gradient = Eigen::VectorXd::Zero(dimension());
  const bool ok = run(theta, with_gradient, [&](int t, int i, double x, const auto& dx) {
    const double y = target_(t, i);
    out.per_day[t - 1] += (std::log(x) + y / x) * inv_n;
    if (with_gradient) out.gradient += ((1.0 / x - y / (x * x)) * inv_n) * dx.transpose();
  });
  if (!ok) {
    out.feasible = false;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  out.value = out.per_day.sum() / days();
  out.gradient /= days();
  return out;
}

RecursionLikelihood::Contributions RecursionLikelihood::contributions(const Eigen::VectorXd& theta) const {
  const int n = assets();
  Contributions out;
  out.scaled_gradient.resize(static_cast<Eigen::Index>(days() - 1) * n, dimension());
  out.ratio.resize(static_cast<Eigen::Index>(days() - 1) * n);
  const bool ok = run(theta, true, [&](int t, int i, double x, const auto& dx) {
    const auto row = static_cast<Eigen::Index>(t - 1) * n + i;
    out.scaled_gradient.row(row) = dx / x;
    out.ratio[row] = target_(t, i) / x;
  });
  if (!ok) throw InvalidInput("parameters produce a nonpositive intercept or state");
  return out;
}

Panel RecursionLikelihood::filtered(const Eigen::VectorXd& theta) const {
  const int n = assets();
  Panel x(days() + 1, n);
  x.row(0) = init_.transpose();
  const bool ok = run(theta, false, [&](int t, int i, double xi, const auto&) { x(t, i) = xi; });
  if (!ok) throw InvalidInput("parameters produce a nonpositive intercept or state");
  // one more step using the last observed day
  const int off = targeted_ ? 0 : 1;
  const Eigen::VectorXd c = intercepts(theta);
  const int last = days() - 1;
  for (int i = 0; i < n; ++i) {
    x(days(), i) = c[i] + theta[off] * driver_(last, i) + theta[off + 1] * network_driver_(last, i) +
                   theta[off + 2] * x(last, i);
  }
  return x;
}

}  // namespace nheavy
