#include "nheavy/realized.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "nheavy/errors.hpp"
#include "nheavy/rng.hpp"

namespace nheavy {

namespace {

std::string cell(int day, int asset) {
  return "day " + std::to_string(day) + ", asset " + std::to_string(asset);
}

Eigen::MatrixXd cholesky_factor(const DiffusionSpec& spec) {
  const auto& g = spec.gamma;
  if (g.rows() != g.cols() || g.rows() != spec.tau.size()) throw InvalidInput("gamma must be N x N");
  if (!g.allFinite() || !g.isApprox(g.transpose(), 1e-12)) throw InvalidInput("gamma must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success) throw InvalidInput("gamma is not positive definite");
  return llt.matrixL();
}

void check_grid(int l_days, int m_ticks, int n) {
  if (l_days < 1) throw InvalidInput("number of days must be >= 1");
  if (m_ticks < 1) throw InvalidInput("number of ticks must be >= 1");
  if (n < 1) throw InvalidInput("number of assets must be >= 1");
}

/// Simulates one day of the Euler scheme starting from the previous close.
class DiffusionStepper {
 public:
  DiffusionStepper(const DiffusionSpec& spec, int m_ticks, std::uint64_t seed)
      : chol_(cholesky_factor(spec)), m_ticks_(m_ticks), rng_(seed, Stream::diffusion), z_(spec.assets()) {}

  void day(IntradayPanel& p, int l, const Eigen::VectorXd& scale) {
    const int n = p.n;
    const Eigen::VectorXd sd = (scale.array() / m_ticks_).sqrt();
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = p.close(l - 1, i);
    for (int m = 0; m < m_ticks_; ++m) {
      for (int i = 0; i < n; ++i) z_[i] = rng_.normal();
      x += sd.cwiseProduct(chol_.triangularView<Eigen::Lower>() * z_);
      for (int i = 0; i < n; ++i) p.at(l, m, i) = x[i];
    }
  }

 private:
  Eigen::MatrixXd chol_;
  int m_ticks_;
  Rng rng_;
  Eigen::VectorXd z_;
};

void add_day_noise(const IntradayPanel& clean, IntradayPanel& out, int l, double noise_sd, Rng& rng) {
  for (int m = 0; m < clean.m_ticks; ++m) {
    for (int i = 0; i < clean.n; ++i) out.at(l, m, i) = clean.at(l, m, i) + noise_sd * rng.normal();
  }
}

double estimate(const IntradayPanel& p, int day, int asset, const RealizedOptions& options) {
  double v = 0.0;
  if (options.estimator == RealizedEstimator::naive) {
    v = rv_naive(p, day, asset);
  } else {
    const int k = options.scales > 0 ? options.scales : default_msrv_scales(p.m_ticks);
    v = multiscale_rv(p, day, asset, k);
  }
  if (!std::isfinite(v) || v < 0.0) {
    throw DataError("realized estimator gave " + std::to_string(v) + " at " + cell(day, asset));
  }
  return v;
}

}  // namespace

IntradayPanel::IntradayPanel(int l_days, int m_ticks, int n)
    : l_days(l_days),
      m_ticks(m_ticks),
      n(n),
      start(Eigen::VectorXd::Zero(n)),
      logp(static_cast<std::size_t>(l_days) * m_ticks * n, 0.0) {}

void IntradayPanel::validate() const {
  if (logp.size() != static_cast<std::size_t>(l_days) * m_ticks * n || start.size() != n) {
    throw DataError("intraday panel has inconsistent dimensions");
  }
  if (!start.allFinite()) throw DataError("intraday starting prices are not finite");
  for (int l = 0; l < l_days; ++l) {
    for (int m = 0; m < m_ticks; ++m) {
      for (int i = 0; i < n; ++i) {
        if (!std::isfinite(at(l, m, i))) {
          throw DataError("non-finite log price at " + cell(l, i) + ", tick " + std::to_string(m));
        }
      }
    }
  }
}

DiffusionSpec make_diffusion_spec(const Eigen::VectorXd& tau, double kappa, double noise_sd) {
  if (tau.size() < 1) throw InvalidInput("tau must be nonempty");
  if (!tau.allFinite() || (tau.array() <= 0.0).any()) throw InvalidInput("tau entries must be positive");
  if (!(kappa >= 0.0 && kappa < 1.0)) throw InvalidInput("kappa must lie in [0, 1)");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw InvalidInput("noise_sd must be >= 0");
  DiffusionSpec spec;
  spec.tau = tau;
  spec.kappa = kappa;
  spec.noise_sd = noise_sd;
  const auto n = tau.size();
  spec.gamma.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      spec.gamma(i, j) = std::sqrt(tau[i] * tau[j]) * std::pow(kappa, static_cast<double>(std::abs(i - j)));
    }
  }
  return spec;
}

DiffusionSpec draw_diffusion_spec(int n, std::uint64_t seed, double kappa, double noise_sd) {
  if (n < 1) throw InvalidInput("number of assets must be >= 1");
  Rng rng(seed, Stream::scales);
  Eigen::VectorXd tau(n);
  for (int i = 0; i < n; ++i) tau[i] = 1.0 - rng.uniform();
  return make_diffusion_spec(tau, kappa, noise_sd);
}

IntradayPanel simulate_diffusion(const DiffusionSpec& spec, int l_days, int m_ticks, std::uint64_t seed) {
  return simulate_diffusion(spec, l_days, m_ticks, Panel::Ones(std::max(l_days, 0), spec.assets()), seed);
}

IntradayPanel simulate_diffusion(const DiffusionSpec& spec, int l_days, int m_ticks, const Panel& day_scale,
                                 std::uint64_t seed) {
  const int n = spec.assets();
  check_grid(l_days, m_ticks, n);
  if (day_scale.rows() != l_days || day_scale.cols() != n) throw InvalidInput("day_scale must be L x N");
  if (!day_scale.allFinite() || (day_scale.array() < 0.0).any()) {
    throw InvalidInput("day_scale entries must be finite and nonnegative");
  }
  DiffusionStepper stepper(spec, m_ticks, seed);
  IntradayPanel p(l_days, m_ticks, n);
  for (int l = 0; l < l_days; ++l) stepper.day(p, l, day_scale.row(l).transpose());
  return p;
}

IntradayPanel add_noise(const IntradayPanel& clean, double noise_sd, std::uint64_t seed) {
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw InvalidInput("noise_sd must be >= 0");
  IntradayPanel out = clean;
  if (noise_sd == 0.0) return out;
  Rng rng(seed, Stream::noise);
  for (int l = 0; l < clean.l_days; ++l) add_day_noise(clean, out, l, noise_sd, rng);
  return out;
}

double rv_naive(const IntradayPanel& p, int day, int asset) {
  if (p.m_ticks < 2) throw InvalidInput("realized variance needs at least two ticks per day");
  double sum = 0.0;
  for (int m = 1; m < p.m_ticks; ++m) {
    const double d = p.at(day, m, asset) - p.at(day, m - 1, asset);
    sum += d * d;
  }
  return sum;
}

std::vector<double> msrv_weights(int k_scales) {
  if (k_scales < 2) throw InvalidInput("multi-scale estimator needs at least two scales");
  const double k_big = k_scales;
  std::vector<double> a(k_scales);
  for (int k = 1; k <= k_scales; ++k) {
    a[k - 1] = 12.0 * k * (k - (k_big + 1.0) / 2.0) / (k_big * (k_big * k_big - 1.0));
  }
  return a;
}

int default_msrv_scales(int m_ticks) {
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m_ticks))));
  return std::clamp(k, 2, std::max(2, m_ticks - 1));
}

double multiscale_rv(const IntradayPanel& p, int day, int asset, int k_scales) {
  if (k_scales < 2) throw InvalidInput("multi-scale estimator needs at least two scales");
  if (k_scales >= p.m_ticks) throw InvalidInput("number of scales must be smaller than ticks per day");
  const auto a = msrv_weights(k_scales);
  const int n = p.m_ticks - 1;
  double total = 0.0;
  for (int k = 1; k <= k_scales; ++k) {
    double sum = 0.0;
    for (int j = k; j <= n; ++j) {
      const double d = p.at(day, j, asset) - p.at(day, j - k, asset);
      sum += d * d;
    }
    total += a[k - 1] * sum * n / (static_cast<double>(n - k + 1) * k);
  }
  return total;
}

PanelSeries build_panel(const IntradayPanel& intraday, const RealizedOptions& options) {
  return build_panel(intraday, intraday, options);
}

PanelSeries build_panel(const IntradayPanel& observed, const IntradayPanel& clean, const RealizedOptions& options) {
  if (observed.l_days != clean.l_days || observed.n != clean.n) {
    throw InvalidInput("observed and clean intraday panels differ in shape");
  }
  if (observed.l_days < 1) throw InvalidInput("intraday panel has no days");
  const int l_days = observed.l_days;
  const int n = observed.n;
  PanelSeries out{Panel(l_days, n), Panel(l_days, n)};
  for (int l = 0; l < l_days; ++l) {
    for (int i = 0; i < n; ++i) {
      const double r = clean.close(l, i) - clean.close(l - 1, i);
      out.r2(l, i) = r * r;
      out.rm(l, i) = estimate(observed, l, i, options);
    }
  }
  return out;
}

PipelineSimulation simulate_pipeline(const NheavyParams& params, const NormalizedNetwork& w, int t_len,
                                     const PipelineSpec& spec, std::uint64_t seed, IntradayPanel* intraday) {
  const int n = w.size();
  check_grid(t_len, spec.m_ticks, n);
  if (spec.m_ticks < 3) throw InvalidInput("pipeline needs at least three ticks per day");
  if (spec.burn_in < 0) throw InvalidInput("burn-in must be >= 0");
  if (spec.measure.family == InnovationFamily::gamma && !(spec.measure.shape > 0.0)) {
    throw InvalidInput("gamma shape must be positive");
  }
  const auto report = check_stationarity(params, w);
  if (!report.stationary) throw InvalidInput("refusing to simulate nonstationary parameters");
  validate_params(params);

  PipelineSimulation sim;
  sim.diffusion = draw_diffusion_spec(n, seed, spec.kappa, spec.noise_sd);
  DiffusionStepper stepper(sim.diffusion, spec.m_ticks, seed);
  Rng noise_rng(seed, Stream::noise);
  Rng innov_rng(seed, Stream::innovations);
  auto draw_measure = [&]() {
    switch (spec.measure.family) {
      case InnovationFamily::unit:
        return 1.0;
      case InnovationFamily::chi_square_1: {
        const double z = innov_rng.normal();
        return z * z;
      }
      case InnovationFamily::gamma:
        return std::gamma_distribution<double>(spec.measure.shape, 1.0 / spec.measure.shape)(innov_rng.engine());
    }
    return 1.0;
  };

  const auto dyn = build_block_dynamics(params, w);
  auto [h, mu] = unconditional_means(dyn);
  Eigen::VectorXd rm = mu;
  const auto& p = params.phi;
  const auto& q = params.phi_r;

  IntradayPanel clean(t_len, spec.m_ticks, n);
  IntradayPanel noisy(t_len, spec.m_ticks, n);
  sim.panel.r2.resize(t_len, n);
  sim.panel.rm.resize(t_len, n);
  sim.latent.h.resize(t_len, n);
  sim.latent.mu.resize(t_len, n);
  sim.target_rm.resize(t_len, n);
  const double m = spec.m_ticks;

  for (int t = 0; t < spec.burn_in + t_len; ++t) {
    if (t > 0) {
      const Eigen::VectorXd net = w.apply(rm);
      h = (p.omega + p.beta * h.array()).matrix() + p.alpha * rm + p.lambda * net;
      mu = (q.omega + q.beta * mu.array()).matrix() + q.alpha * rm + q.lambda * net;
    }
    Eigen::VectorXd target(n);
    for (int i = 0; i < n; ++i) target[i] = draw_measure() * mu[i];
    if (t < spec.burn_in) {
      rm = target;
      continue;
    }
    const int l = t - spec.burn_in;
    // variance rate that makes the within-day integrated variance equal the target
    const Eigen::VectorXd scale = (target * (m / (m - 1.0))).cwiseQuotient(sim.diffusion.tau);
    stepper.day(clean, l, scale);
    add_day_noise(clean, noisy, l, spec.noise_sd, noise_rng);
    for (int i = 0; i < n; ++i) {
      const double ret = clean.close(l, i) - clean.close(l - 1, i);
      const double var = scale[i] * sim.diffusion.tau[i];
      sim.panel.r2(l, i) = var > 0.0 ? h[i] * ret * ret / var : 0.0;
      rm[i] = estimate(noisy, l, i, spec.realized);
    }
    sim.panel.rm.row(l) = rm.transpose();
    sim.latent.h.row(l) = h.transpose();
    sim.latent.mu.row(l) = mu.transpose();
    sim.target_rm.row(l) = target.transpose();
  }
  if (intraday != nullptr) *intraday = std::move(noisy);
  return sim;
}

}  // namespace nheavy
