#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "nheavy/model.hpp"
#include "nheavy/network.hpp"

namespace nheavy {

/// Log prices on the regular grid t_{l,m} = l + (m + 1) / M (0-based day l and tick m),
/// plus the starting price X(0) that precedes the first tick.
struct IntradayPanel {
  int l_days = 0;
  int m_ticks = 0;
  int n = 0;
  Eigen::VectorXd start;
  std::vector<double> logp;  // index (l * M + m) * N + i

  IntradayPanel() = default;
  IntradayPanel(int l_days, int m_ticks, int n);

  double& at(int day, int tick, int asset) { return logp[index(day, tick, asset)]; }
  double at(int day, int tick, int asset) const { return logp[index(day, tick, asset)]; }
  /// Last tick of the day, or the starting price for day -1.
  double close(int day, int asset) const { return day < 0 ? start[asset] : at(day, m_ticks - 1, asset); }

  /// Throws DataError on a non-finite entry.
  void validate() const;

 private:
  std::size_t index(int day, int tick, int asset) const {
    return (static_cast<std::size_t>(day) * m_ticks + tick) * n + asset;
  }
};

/// Constant spot covariance gamma_ij = sqrt(tau_i tau_j) kappa^{|i-j|} per unit of time, zero drift.
struct DiffusionSpec {
  Eigen::MatrixXd gamma;
  Eigen::VectorXd tau;
  double kappa = 0.5;
  double noise_sd = 0.001;

  int assets() const { return static_cast<int>(tau.size()); }
};

DiffusionSpec make_diffusion_spec(const Eigen::VectorXd& tau, double kappa = 0.5, double noise_sd = 0.001);
/// tau_i drawn from U(0, 1].
DiffusionSpec draw_diffusion_spec(int n, std::uint64_t seed, double kappa = 0.5, double noise_sd = 0.001);

/// Euler scheme X(t + 1/M) = X(t) + sqrt(1/M) L z with L L^T = gamma, X(0) = 0.
/// Throws InvalidInput when gamma is not symmetric positive definite.
IntradayPanel simulate_diffusion(const DiffusionSpec& spec, int l_days, int m_ticks, std::uint64_t seed);

/// Time-varying variant: on day l asset i's variance rate is scaled by day_scale(l, i),
/// i.e. the day's covariance is diag(sqrt(s_l)) gamma diag(sqrt(s_l)).
IntradayPanel simulate_diffusion(const DiffusionSpec& spec, int l_days, int m_ticks, const Panel& day_scale,
                                 std::uint64_t seed);

/// Y = X + xi, xi i.i.d. N(0, noise_sd^2) per tick and asset. The starting price is untouched.
IntradayPanel add_noise(const IntradayPanel& clean, double noise_sd, std::uint64_t seed);

/// Sum of squared within-day increments (M - 1 of them).
double rv_naive(const IntradayPanel& p, int day, int asset);

/// Multi-scale weights a_k = 12 k (k - (K + 1) / 2) / (K (K^2 - 1)), k = 1..K, from
/// L. Zhang (2006), "Efficient estimation of stochastic volatility using noisy
/// observations: a multi-scale approach", Bernoulli 12(6). They satisfy
/// sum a_k = 1 and sum a_k / k = 0.
std::vector<double> msrv_weights(int k_scales);

/// round(sqrt(M)), at least 2 and at most M - 1.
int default_msrv_scales(int m_ticks);

/// sum_k a_k RV^(k) where, with n = M - 1 within-day increments and ticks Y_0..Y_n,
/// RV^(k) = n / ((n - k + 1) k) sum_{j=k}^{n} (Y_j - Y_{j-k})^2
/// is the average of the k subsampled RVs at step k, rescaled for the shorter span.
/// Throws InvalidInput unless 2 <= K < M.
double multiscale_rv(const IntradayPanel& p, int day, int asset, int k_scales);

enum class RealizedEstimator { naive, multiscale };

struct RealizedOptions {
  RealizedEstimator estimator = RealizedEstimator::multiscale;
  int scales = 0;  // 0 picks default_msrv_scales
};

/// Daily panel: r2 from close-to-close log returns (day 0 against the starting price)
/// and RM from the chosen estimator. A negative or non-finite estimate throws DataError
/// naming the day and asset.
PanelSeries build_panel(const IntradayPanel& intraday, const RealizedOptions& options = {});
/// Returns from `clean` and realized measures from `observed`.
PanelSeries build_panel(const IntradayPanel& observed, const IntradayPanel& clean, const RealizedOptions& options = {});

/// Full simulation chain, one day at a time. From the previous day's observed RM the
/// NHEAVY recursions give (h, mu); the day's within-day integrated variance is set to
/// RM* = epsilon_R mu, the diffusion is simulated and contaminated with per-tick noise,
/// and RM is estimated from the noisy prices. r2 = h z^2, with z the clean close-to-close
/// return standardised by its exact variance, so the return innovation is chi^2(1).
/// Burn-in days use RM = RM* without the intraday step.
struct PipelineSpec {
  InnovationLaw measure{InnovationFamily::gamma, 4.0};
  double kappa = 0.5;
  double noise_sd = 0.001;
  int m_ticks = 390;
  RealizedOptions realized;
  int burn_in = 500;
};

struct PipelineSimulation {
  PanelSeries panel;
  LatentPanels latent;
  Panel target_rm;  // RM*
  DiffusionSpec diffusion;
};

PipelineSimulation simulate_pipeline(const NheavyParams& params, const NormalizedNetwork& w, int t_len,
                                     const PipelineSpec& spec, std::uint64_t seed, IntradayPanel* intraday = nullptr);

}  // namespace nheavy
