#include "nheavy/model.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "nheavy/errors.hpp"

namespace nheavy {

namespace {

void require_nonnegative(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) throw InvalidInput(std::string(name) + " must be finite and nonnegative");
}

Eigen::MatrixXd v1_block(const EquationParams& phi, const NormalizedNetwork& w) {
  const int n = w.size();
  return phi.alpha * Eigen::MatrixXd::Identity(n, n) + phi.lambda * w.dense();
}

Eigen::MatrixXd v2_block(const EquationParams& phi_r, const NormalizedNetwork& w) {
  const int n = w.size();
  return (phi_r.alpha + phi_r.beta) * Eigen::MatrixXd::Identity(n, n) + phi_r.lambda * w.dense();
}

void check_state(const Eigen::VectorXd& v, int n, const char* what) {
  if (v.size() != n) throw InvalidInput(std::string(what) + " has wrong length");
}

}  // namespace

void validate_params(const NheavyParams& p) {
  require_nonnegative(p.phi.omega, "omega");
  require_nonnegative(p.phi.alpha, "alpha");
  require_nonnegative(p.phi.lambda, "lambda");
  require_nonnegative(p.phi.beta, "beta");
  require_nonnegative(p.phi_r.omega, "omega_r");
  require_nonnegative(p.phi_r.alpha, "alpha_r");
  require_nonnegative(p.phi_r.lambda, "lambda_r");
  require_nonnegative(p.phi_r.beta, "beta_r");
  if (p.phi.beta >= 1.0) throw InvalidInput("beta must be < 1");
  if (p.phi_r.alpha + p.phi_r.lambda + p.phi_r.beta >= 1.0) {
    throw InvalidInput("alpha_r + lambda_r + beta_r must be < 1");
  }
}

bool in_targeting_region(const EquationParams& phi, double kappa_max) {
  return phi.alpha + phi.lambda * kappa_max + phi.beta < 1.0;
}

void PanelSeries::validate() const {
  if (r2.rows() != rm.rows() || r2.cols() != rm.cols()) throw DataError("r2 and rm panels differ in shape");
  for (Eigen::Index t = 0; t < r2.rows(); ++t) {
    for (Eigen::Index i = 0; i < r2.cols(); ++i) {
      for (const auto* m : {&r2, &rm}) {
        const double v = (*m)(t, i);
        if (!std::isfinite(v) || v < 0.0) {
          std::ostringstream os;
          os << (m == &r2 ? "r2" : "rm") << " at day " << t << ", asset " << i << " is " << v
             << " (must be finite and >= 0)";
          throw DataError(os.str());
        }
      }
    }
  }
}

PanelSeries PanelSeries::slice(int first, int count) const {
  if (first < 0 || count < 0 || first + count > days()) throw InvalidInput("panel slice out of range");
  return {r2.middleRows(first, count), rm.middleRows(first, count)};
}

Panel filter_equation(const Eigen::VectorXd& intercept, double alpha, double lambda, double beta,
                      const NormalizedNetwork& w, const Panel& driver, const Eigen::VectorXd& init) {
  const int n = w.size();
  const auto t_len = driver.rows();
  if (driver.cols() != n) throw InvalidInput("panel width does not match network size");
  check_state(intercept, n, "intercept");
  check_state(init, n, "initial state");
  if ((init.array() <= 0.0).any()) throw InvalidInput("initial values must be strictly positive");
  if (!driver.allFinite()) throw DataError("driver panel contains non-finite values");

  const Panel net = w.apply_rows(driver);
  Panel x(t_len, n);
  if (t_len == 0) return x;
  x.row(0) = init.transpose();
  for (Eigen::Index t = 1; t < t_len; ++t) {
    for (int i = 0; i < n; ++i) {
      x(t, i) = intercept[i] + alpha * driver(t - 1, i) + lambda * net(t - 1, i) + beta * x(t - 1, i);
    }
  }
  return x;
}

LatentPanels filter(const NheavyParams& params, const NormalizedNetwork& w, const PanelSeries& panel,
                    const Eigen::VectorXd& h_init, const Eigen::VectorXd& mu_init) {
  const int n = w.size();
  return filter(params, Eigen::VectorXd::Constant(n, params.phi.omega), Eigen::VectorXd::Constant(n, params.phi_r.omega),
                w, panel, h_init, mu_init);
}

LatentPanels filter(const NheavyParams& params, const Eigen::VectorXd& omega, const Eigen::VectorXd& omega_r,
                    const NormalizedNetwork& w, const PanelSeries& panel, const Eigen::VectorXd& h_init,
                    const Eigen::VectorXd& mu_init) {
  if (panel.rm.hasNaN() || panel.r2.hasNaN()) throw DataError("panel contains NaN");
  const auto& p = params.phi;
  const auto& q = params.phi_r;
  return {filter_equation(omega, p.alpha, p.lambda, p.beta, w, panel.rm, h_init),
          filter_equation(omega_r, q.alpha, q.lambda, q.beta, w, panel.rm, mu_init)};
}

BlockDynamics build_block_dynamics(const NheavyParams& params, const NormalizedNetwork& w) {
  const int n = w.size();
  return build_block_dynamics(params, Eigen::VectorXd::Constant(n, params.phi.omega),
                              Eigen::VectorXd::Constant(n, params.phi_r.omega), w);
}

BlockDynamics build_block_dynamics(const NheavyParams& params, const Eigen::VectorXd& omega,
                                   const Eigen::VectorXd& omega_r, const NormalizedNetwork& w) {
  const int n = w.size();
  check_state(omega, n, "omega");
  check_state(omega_r, n, "omega_r");
  BlockDynamics dyn;
  dyn.w.resize(2 * n);
  dyn.w << omega, omega_r;
  dyn.b = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  dyn.b.topLeftCorner(n, n) = params.phi.beta * Eigen::MatrixXd::Identity(n, n);
  dyn.b.topRightCorner(n, n) = v1_block(params.phi, w);
  dyn.b.bottomRightCorner(n, n) = v2_block(params.phi_r, w);
  return dyn;
}

Eigen::MatrixXd b_power(const BlockDynamics& dyn, int j) {
  const int n = dyn.assets();
  if (j < 0) throw InvalidInput("matrix power exponent must be nonnegative");
  if (j == 0) return Eigen::MatrixXd::Identity(2 * n, 2 * n);
  const double beta = dyn.beta();
  const Eigen::MatrixXd v2 = dyn.v2();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  // Horner form: s_1 = I, s_{k+1} = v2 s_k + beta^k I gives s_j = sum_k v2^{j-1-k} beta^k.
  Eigen::MatrixXd v2_pow = v2;
  Eigen::MatrixXd s = id;
  double beta_pow = 1.0;
  for (int k = 1; k < j; ++k) {
    beta_pow *= beta;
    s = v2 * s + beta_pow * id;
    v2_pow = v2_pow * v2;
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  out.topLeftCorner(n, n) = std::pow(beta, j) * id;
  out.topRightCorner(n, n) = dyn.v1() * s;
  out.bottomRightCorner(n, n) = v2_pow;
  return out;
}

StationarityReport check_stationarity(const NheavyParams& params, const NormalizedNetwork& w) {
  StationarityReport r;
  r.bound = std::max(params.phi.beta, params.phi_r.alpha + params.phi_r.lambda + params.phi_r.beta);
  // B is block upper-triangular, so its spectrum is beta (N-fold) together with that of v2.
  double rho = std::abs(params.phi.beta);
  if (w.size() > 0) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(v2_block(params.phi_r, w), false);
    rho = std::max(rho, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  r.spectral_radius = rho;
  r.stationary = rho < 1.0;
  return r;
}

VolatilityForecast forecast(const NheavyParams& params, const NormalizedNetwork& w, const Eigen::VectorXd& h_last,
                            const Eigen::VectorXd& mu_last, int s) {
  auto out = forecast(build_block_dynamics(params, w), h_last, mu_last, s);
  out.stationary = check_stationarity(params, w).stationary;
  return out;
}

VolatilityForecast forecast(const BlockDynamics& dyn, const Eigen::VectorXd& h_last, const Eigen::VectorXd& mu_last,
                            int s) {
  const int n = dyn.assets();
  if (s < 0) throw InvalidInput("forecast horizon must be >= 0");
  check_state(h_last, n, "h_last");
  check_state(mu_last, n, "mu_last");
  Eigen::VectorXd state(2 * n);
  state << h_last, mu_last;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(2 * n);
  for (int j = 0; j <= s; ++j) acc += b_power(dyn, j) * dyn.w;
  acc += b_power(dyn, s + 1) * state;

  VolatilityForecast out;
  out.h = acc.head(n);
  out.mu = acc.tail(n);
  const double beta = std::abs(dyn.beta());
  double rho = beta;
  if (n > 0) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(dyn.v2(), false);
    rho = std::max(rho, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  out.stationary = rho < 1.0;
  return out;
}

VolatilityForecast forecast_from_next_state(const BlockDynamics& dyn, const Eigen::VectorXd& h_next,
                                            const Eigen::VectorXd& mu_next, int steps) {
  if (steps < 1) throw InvalidInput("forecast steps must be >= 1");
  if (steps == 1) {
    VolatilityForecast out;
    out.h = h_next;
    out.mu = mu_next;
    return out;
  }
  return forecast(dyn, h_next, mu_next, steps - 2);
}

TargetingIntercepts targeting_intercepts(const NheavyParams& params, const NormalizedNetwork& w,
                                         const Eigen::VectorXd& mu_bar, const Eigen::VectorXd& mu_r_bar) {
  const int n = w.size();
  check_state(mu_bar, n, "mu_bar");
  check_state(mu_r_bar, n, "mu_r_bar");
  for (int i = 0; i < n; ++i) {
    if (!(mu_bar[i] > 0.0)) throw InvalidInput("unconditional mean of r2 must be > 0 for asset " + std::to_string(i));
  }
  const Eigen::VectorXd net = w.apply(mu_r_bar);
  const auto& p = params.phi;
  const auto& q = params.phi_r;
  TargetingIntercepts out;
  out.returns.resize(n);
  out.measure.resize(n);
  for (int i = 0; i < n; ++i) {
    const double kappa = mu_r_bar[i] / mu_bar[i];
    out.returns[i] = (1.0 - p.alpha * kappa - p.beta) * mu_bar[i] - p.lambda * net[i];
    out.measure[i] = (1.0 - q.alpha - q.beta) * mu_r_bar[i] - q.lambda * net[i];
  }
  return out;
}

double InnovationLaw::second_moment() const {
  switch (family) {
    case InnovationFamily::unit:
      return 1.0;
    case InnovationFamily::chi_square_1:
      return 3.0;
    case InnovationFamily::gamma:
      return 1.0 + 1.0 / shape;
  }
  return 1.0;
}

double InnovationLaw::from_normal(double z) const {
  namespace bm = boost::math;
  const bm::normal_distribution<> std_normal;
  const bool upper = z > 0.0;
  const double tail = bm::cdf(std_normal, upper ? -z : z);  // lower-tail prob of -|z|
  auto quantile_of = [&](const auto& dist) {
    return upper ? bm::quantile(bm::complement(dist, tail)) : bm::quantile(dist, tail);
  };
  switch (family) {
    case InnovationFamily::unit:
      return 1.0;
    case InnovationFamily::chi_square_1:
      return quantile_of(bm::chi_squared_distribution<>(1.0));
    case InnovationFamily::gamma:
      return quantile_of(bm::gamma_distribution<>(shape, 1.0 / shape));
  }
  return 1.0;
}

namespace {

// Gauss-Hermite nodes and weights for the weight exp(-x^2) (Golub-Welsch).
void gauss_hermite(int m, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) {
    jac(k, k - 1) = jac(k - 1, k) = std::sqrt(k / 2.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  nodes = es.eigenvalues();
  weights = std::sqrt(M_PI) * es.eigenvectors().row(0).transpose().array().square();
}

}  // namespace

double InnovationSpec::kappa2_cross() const {
  if (correlation == 0.0 || returns.family == InnovationFamily::unit || measure.family == InnovationFamily::unit) {
    return 1.0;
  }
  Eigen::VectorXd x, wgt;
  gauss_hermite(80, x, wgt);
  const double rho = correlation;
  const double s = std::sqrt(1.0 - rho * rho);
  double acc = 0.0;
  for (int a = 0; a < x.size(); ++a) {
    const double z1 = std::sqrt(2.0) * x[a];
    const double e1 = returns.from_normal(z1);
    for (int b = 0; b < x.size(); ++b) {
      const double z2 = rho * z1 + s * std::sqrt(2.0) * x[b];
      acc += wgt[a] * wgt[b] * e1 * measure.from_normal(z2);
    }
  }
  return acc / M_PI;
}

void InnovationSpec::validate() const {
  for (const auto* law : {&returns, &measure}) {
    if (law->family == InnovationFamily::gamma && !(law->shape > 0.0)) {
      throw InvalidInput("gamma innovation shape must be > 0");
    }
  }
  if (!(correlation > -1.0 && correlation < 1.0)) throw InvalidInput("innovation correlation must lie in (-1, 1)");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> unconditional_means(const BlockDynamics& dyn) {
  const int n = dyn.assets();
  const Eigen::MatrixXd i_minus_b = Eigen::MatrixXd::Identity(2 * n, 2 * n) - dyn.b;
  const Eigen::VectorXd m = i_minus_b.partialPivLu().solve(dyn.w);
  return {m.head(n), m.tail(n)};
}

namespace {

class InnovationSampler {
 public:
  InnovationSampler(const InnovationSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed, Stream::innovations) {}

  void draw(double& eps, double& eps_rm) {
    if (spec_.correlation == 0.0) {
      eps = direct(spec_.returns);
      eps_rm = direct(spec_.measure);
      return;
    }
    const double z1 = rng_.normal();
    const double z2 = spec_.correlation * z1 + std::sqrt(1.0 - spec_.correlation * spec_.correlation) * rng_.normal();
    eps = spec_.returns.from_normal(z1);
    eps_rm = spec_.measure.from_normal(z2);
  }

 private:
  double direct(const InnovationLaw& law) {
    switch (law.family) {
      case InnovationFamily::unit:
        return 1.0;
      case InnovationFamily::chi_square_1: {
        const double z = rng_.normal();
        return z * z;
      }
      case InnovationFamily::gamma:
        return std::gamma_distribution<double>(law.shape, 1.0 / law.shape)(rng_.engine());
    }
    return 1.0;
  }

  const InnovationSpec& spec_;
  Rng rng_;
};

}  // namespace

NheavySimulation simulate_nheavy(const NheavyParams& params, const NormalizedNetwork& w, int t_len,
                                 const InnovationSpec& innov, int burn_in, std::uint64_t seed) {
  if (t_len < 1) throw InvalidInput("simulation length must be >= 1");
  if (burn_in < 0) throw InvalidInput("burn-in must be >= 0");
  innov.validate();
  const auto report = check_stationarity(params, w);
  if (!report.stationary) {
    std::ostringstream os;
    os << "refusing to simulate nonstationary parameters (spectral radius " << report.spectral_radius << ")";
    throw InvalidInput(os.str());
  }
  validate_params(params);

  const int n = w.size();
  const auto dyn = build_block_dynamics(params, w);
  auto [h, mu] = unconditional_means(dyn);
  Eigen::VectorXd rm = mu;
  const auto& p = params.phi;
  const auto& q = params.phi_r;

  InnovationSampler sampler(innov, seed);
  NheavySimulation sim;
  sim.panel.r2.resize(t_len, n);
  sim.panel.rm.resize(t_len, n);
  sim.latent.h.resize(t_len, n);
  sim.latent.mu.resize(t_len, n);

  const int total = burn_in + t_len;
  for (int t = 0; t < total; ++t) {
    if (t > 0) {
      const Eigen::VectorXd net = w.apply(rm);
      h = (p.omega + p.beta * h.array()).matrix() + p.alpha * rm + p.lambda * net;
      mu = (q.omega + q.beta * mu.array()).matrix() + q.alpha * rm + q.lambda * net;
    }
    Eigen::VectorXd r2(n);
    for (int i = 0; i < n; ++i) {
      double eps = 1.0;
      double eps_rm = 1.0;
      sampler.draw(eps, eps_rm);
      r2[i] = eps * h[i];
      rm[i] = eps_rm * mu[i];
    }
    if (t >= burn_in) {
      const int row = t - burn_in;
      sim.panel.r2.row(row) = r2.transpose();
      sim.panel.rm.row(row) = rm.transpose();
      sim.latent.h.row(row) = h.transpose();
      sim.latent.mu.row(row) = mu.transpose();
    }
  }
  return sim;
}

}  // namespace nheavy
