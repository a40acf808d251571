#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "nheavy/network.hpp"
#include "nheavy/rng.hpp"

namespace nheavy {

/// Days-by-assets panel (row t is day t).
using Panel = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Coefficients of one NHEAVY equation: intercept, own lag, network lag, persistence.
struct EquationParams {
  double omega = 0.0;
  double alpha = 0.0;
  double lambda = 0.0;
  double beta = 0.0;

  bool operator==(const EquationParams&) const = default;
};

/// theta = (phi, phi_r): the return-variance equation and the realized-measure equation.
struct NheavyParams {
  EquationParams phi;
  EquationParams phi_r;

  bool operator==(const NheavyParams&) const = default;
};

/// Throws InvalidInput unless every coefficient is finite and nonnegative, beta < 1
/// and alpha_r + lambda_r + beta_r < 1.
void validate_params(const NheavyParams& p);

/// alpha + lambda * kappa_max + beta < 1.
bool in_targeting_region(const EquationParams& phi, double kappa_max);

/// Aligned daily panels of squared returns and realized measures.
struct PanelSeries {
  Panel r2;
  Panel rm;

  int days() const { return static_cast<int>(r2.rows()); }
  int assets() const { return static_cast<int>(r2.cols()); }

  /// Same shape, finite, nonnegative; throws DataError naming the first bad cell.
  void validate() const;
  /// Rows [first, first + count).
  PanelSeries slice(int first, int count) const;
};

/// Conditional variances h and conditional realized-measure means mu.
struct LatentPanels {
  Panel h;
  Panel mu;
};

/// Generic network recursion x_t = c + alpha d_{t-1} + lambda (W d_{t-1}) + beta x_{t-1},
/// x_0 = init, with per-asset intercepts c.
Panel filter_equation(const Eigen::VectorXd& intercept, double alpha, double lambda, double beta,
                      const NormalizedNetwork& w, const Panel& driver, const Eigen::VectorXd& init);

/// Runs both NHEAVY recursions over the panel. The first day's state is the supplied init.
LatentPanels filter(const NheavyParams& params, const NormalizedNetwork& w, const PanelSeries& panel,
                    const Eigen::VectorXd& h_init, const Eigen::VectorXd& mu_init);

/// Same recursions with per-asset intercepts (targeted fits).
LatentPanels filter(const NheavyParams& params, const Eigen::VectorXd& omega, const Eigen::VectorXd& omega_r,
                    const NormalizedNetwork& w, const PanelSeries& panel, const Eigen::VectorXd& h_init,
                    const Eigen::VectorXd& mu_init);

/// Stacked state (h, mu) evolves as w + B (h, mu) + (innovation term).
///   B = [ beta I ,  alpha I + lambda W ]
///       [   0    ,  (alpha_r + beta_r) I + lambda_r W ]
struct BlockDynamics {
  Eigen::VectorXd w;
  Eigen::MatrixXd b;

  int assets() const { return static_cast<int>(w.size() / 2); }
  double beta() const { return b(0, 0); }
  Eigen::MatrixXd v1() const { return b.topRightCorner(assets(), assets()); }
  Eigen::MatrixXd v2() const { return b.bottomRightCorner(assets(), assets()); }
};

BlockDynamics build_block_dynamics(const NheavyParams& params, const NormalizedNetwork& w);
BlockDynamics build_block_dynamics(const NheavyParams& params, const Eigen::VectorXd& omega,
                                   const Eigen::VectorXd& omega_r, const NormalizedNetwork& w);

/// B^j from its block-triangular closed form: the upper-right block is
/// v1 (v2^{j-1} + v2^{j-2} beta + ... + beta^{j-1}). j = 0 gives the identity.
Eigen::MatrixXd b_power(const BlockDynamics& dyn, int j);

struct StationarityReport {
  bool stationary = false;
  double bound = 0.0;            // max(beta, alpha_r + lambda_r + beta_r)
  double spectral_radius = 0.0;  // rho(B), computed numerically
};

StationarityReport check_stationarity(const NheavyParams& params, const NormalizedNetwork& w);

struct VolatilityForecast {
  Eigen::VectorXd h;
  Eigen::VectorXd mu;
  bool stationary = true;  // false flags a forecast made from nonstationary dynamics
};

/// (h, mu)_{t+s | t-1} = (I + B + ... + B^s) w + B^{s+1} (h_{t-1}, mu_{t-1}), s >= 0.
VolatilityForecast forecast(const NheavyParams& params, const NormalizedNetwork& w, const Eigen::VectorXd& h_last,
                            const Eigen::VectorXd& mu_last, int s);
VolatilityForecast forecast(const BlockDynamics& dyn, const Eigen::VectorXd& h_last, const Eigen::VectorXd& mu_last,
                            int s);

/// Forecast `steps` days ahead of an origin whose next-day state (h_{t+1}, mu_{t+1}) is
/// already known from the filter: steps = 1 returns that state, steps >= 2 applies the
/// closed form with s = steps - 2.
VolatilityForecast forecast_from_next_state(const BlockDynamics& dyn, const Eigen::VectorXd& h_next,
                                            const Eigen::VectorXd& mu_next, int steps);

/// Intercepts implied by unconditional moments mu = E r^2 and mu_r = E RM:
///   returns_i = (1 - alpha kappa_i - beta) mu_i - lambda (W mu_r)_i, kappa_i = mu_r_i / mu_i
///   measure_i = (1 - alpha_r - beta_r) mu_r_i - lambda_r (W mu_r)_i
/// The omega fields of params are ignored.
struct TargetingIntercepts {
  Eigen::VectorXd returns;
  Eigen::VectorXd measure;
};

TargetingIntercepts targeting_intercepts(const NheavyParams& params, const NormalizedNetwork& w,
                                         const Eigen::VectorXd& mu_bar, const Eigen::VectorXd& mu_r_bar);

/// Unit-mean innovation law.
enum class InnovationFamily {
  unit,          // degenerate at 1
  chi_square_1,  // chi^2 with one degree of freedom
  gamma,         // Gamma(shape, 1/shape)
};

struct InnovationLaw {
  InnovationFamily family = InnovationFamily::unit;
  double shape = 1.0;  // gamma only

  double second_moment() const;
  /// Quantile at Phi(z), evaluated through the upper tail for z > 0.
  double from_normal(double z) const;
};

/// Joint law of (epsilon_it, epsilon^R_it): independent across assets and days, and
/// linked within a cell by a Gaussian copula with the given correlation.
struct InnovationSpec {
  InnovationLaw returns{InnovationFamily::chi_square_1};
  InnovationLaw measure{InnovationFamily::gamma, 4.0};
  double correlation = 0.0;

  double kappa2_r() const { return returns.second_moment(); }
  double kappa2_rm() const { return measure.second_moment(); }
  /// E(epsilon epsilon^R), by Gauss-Hermite quadrature when correlation != 0.
  double kappa2_cross() const;

  void validate() const;
};

struct NheavySimulation {
  PanelSeries panel;
  LatentPanels latent;
};

/// Forward simulation with r2 = epsilon h and RM = epsilon^R mu, started from the
/// unconditional means; the first burn_in days are discarded. Throws InvalidInput
/// for nonstationary parameters.
NheavySimulation simulate_nheavy(const NheavyParams& params, const NormalizedNetwork& w, int t_len,
                                 const InnovationSpec& innov, int burn_in, std::uint64_t seed);

/// Unconditional means (E h, E mu) of a stationary model.
std::pair<Eigen::VectorXd, Eigen::VectorXd> unconditional_means(const BlockDynamics& dyn);

}  // namespace nheavy
