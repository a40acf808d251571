#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nheavy/errors.hpp"
#include "nheavy/estimation.hpp"
#include "nheavy/evaluation.hpp"
#include "nheavy/io.hpp"
#include "nheavy/model.hpp"
#include "nheavy/network.hpp"
#include "nheavy/realized.hpp"

using nlohmann::json;
using namespace nheavy;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kConvergence = 4, kInternal = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("NHEAVY_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("NHEAVY_SEED is not an unsigned integer: ") + env);
    }
  }
  return 1;
}

enum class Kind { integer, number, text, boolean, seed, object };

/// Command settings: defaults, overridden by a JSON config file, overridden by flags.
class Settings {
 public:
  explicit Settings(CLI::App* cmd) : cmd_(cmd) {
    cmd_->add_option("--config", config_path_, "JSON config file; flags override its values");
  }

  void add(const std::string& key, Kind kind, json def, const std::string& help) {
    auto s = std::make_unique<Setting>();
    s->key = key;
    s->kind = kind;
    s->value = std::move(def);
    std::string flag = "--" + key;
    for (auto& c : flag) {
      if (c == '_') c = '-';
    }
    if (kind == Kind::boolean) {
      s->opt = cmd_->add_flag(flag + ",!--no-" + flag.substr(2), s->flag_value, help);
    } else if (kind == Kind::object) {
      s->opt = cmd_->add_option(flag, s->raw, help + " (path to a JSON file)");
    } else {
      s->opt = cmd_->add_option(flag, s->raw, help);
    }
    settings_.push_back(std::move(s));
  }

  json resolve() const {
    json cfg = json::object();
    for (const auto& s : settings_) cfg[s->key] = s->value;
    if (!config_path_.empty()) {
      json file;
      try {
        file = read_json(config_path_);
      } catch (const DataError& e) {
        throw UsageError(e.what());
      }
      if (!file.is_object()) throw UsageError(config_path_ + ": config must be a JSON object");
      for (const auto& [key, value] : file.items()) {
        const Setting* s = find(key);
        if (s == nullptr) throw UsageError(config_path_ + ": unknown key '" + key + "'");
        cfg[key] = check_type(*s, value, config_path_);
      }
    }
    for (const auto& s : settings_) {
      if (s->opt->count() > 0) cfg[s->key] = from_flag(*s);
    }
    return cfg;
  }

 private:
  struct Setting {
    std::string key;
    Kind kind = Kind::text;
    json value;
    std::string raw;
    bool flag_value = false;
    CLI::Option* opt = nullptr;
  };

  const Setting* find(const std::string& key) const {
    for (const auto& s : settings_) {
      if (s->key == key) return s.get();
    }
    return nullptr;
  }

  static json check_type(const Setting& s, const json& v, const std::string& where) {
    bool ok = v.is_null();
    switch (s.kind) {
      case Kind::integer:
        ok = ok || v.is_number_integer();
        break;
      case Kind::seed:
        ok = ok || v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        break;
      case Kind::number:
        ok = ok || v.is_number();
        break;
      case Kind::text:
        ok = ok || v.is_string();
        break;
      case Kind::boolean:
        ok = ok || v.is_boolean();
        break;
      case Kind::object:
        ok = ok || v.is_object();
        break;
    }
    if (!ok) throw UsageError(where + ": key '" + s.key + "' has the wrong type");
    return v;
  }

  static json from_flag(const Setting& s) {
    const auto bad = [&]() { return UsageError("bad value for --" + s.key + ": '" + s.raw + "'"); };
    try {
      std::size_t used = 0;
      switch (s.kind) {
        case Kind::integer: {
          const long long v = std::stoll(s.raw, &used);
          if (used != s.raw.size()) throw bad();
          return v;
        }
        case Kind::seed: {
          if (!s.raw.empty() && s.raw[0] == '-') throw bad();
          const unsigned long long v = std::stoull(s.raw, &used);
          if (used != s.raw.size()) throw bad();
          return static_cast<std::uint64_t>(v);
        }
        case Kind::number: {
          const double v = std::stod(s.raw, &used);
          if (used != s.raw.size()) throw bad();
          return v;
        }
        case Kind::text:
          return s.raw;
        case Kind::boolean:
          return s.flag_value;
        case Kind::object:
          try {
            return read_json(s.raw);
          } catch (const DataError& e) {
            throw UsageError(e.what());
          }
      }
    } catch (const std::invalid_argument&) {
      throw bad();
    } catch (const std::out_of_range&) {
      throw bad();
    }
    throw bad();
  }

  CLI::App* cmd_;
  std::string config_path_;
  std::vector<std::unique_ptr<Setting>> settings_;
};

std::string text(const json& cfg, const char* key) { return cfg.at(key).is_null() ? "" : cfg.at(key).get<std::string>(); }

std::string required_text(const json& cfg, const char* key) {
  const auto v = text(cfg, key);
  if (v.empty()) throw UsageError(std::string("missing required setting '") + key + "'");
  return v;
}

int integer(const json& cfg, const char* key) { return cfg.at(key).get<int>(); }
double number(const json& cfg, const char* key) { return cfg.at(key).get<double>(); }
std::uint64_t seed_of(const json& cfg) { return cfg.at("seed").get<std::uint64_t>(); }

template <typename E>
E choose(const json& cfg, const char* key, const std::map<std::string, E>& options) {
  const auto v = text(cfg, key);
  const auto it = options.find(v);
  if (it == options.end()) {
    std::string names;
    for (const auto& [name, e] : options) names += (names.empty() ? "" : ", ") + name;
    throw UsageError(std::string("setting '") + key + "' must be one of " + names + ", got '" + v + "'");
  }
  return it->second;
}

const std::map<std::string, NetworkKind> kNetworks = {
    {"dyad", NetworkKind::dyad}, {"powerlaw", NetworkKind::powerlaw}, {"sbm", NetworkKind::sbm}};
const std::map<std::string, Estimator> kEstimators = {{"one_step", Estimator::one_step},
                                                      {"two_step", Estimator::two_step}};
const std::map<std::string, InitRule> kInitRules = {{"sqrt_t", InitRule::sqrt_t},
                                                    {"sample_mean", InitRule::sample_mean}};
const std::map<std::string, PipelineKind> kPipelines = {{"full", PipelineKind::full},
                                                        {"direct", PipelineKind::direct}};
const std::map<std::string, RealizedEstimator> kRealized = {{"naive", RealizedEstimator::naive},
                                                            {"multiscale", RealizedEstimator::multiscale}};
const std::map<std::string, InnovationFamily> kFamilies = {{"unit", InnovationFamily::unit},
                                                           {"chi_square_1", InnovationFamily::chi_square_1},
                                                           {"gamma", InnovationFamily::gamma}};
const std::map<std::string, Protocol> kProtocols = {{"rolling", Protocol::rolling}, {"fixed", Protocol::fixed}};
const std::map<std::string, ModelKind> kModels = {
    {"nheavy", ModelKind::nheavy}, {"ngarch", ModelKind::ngarch}, {"perfect_foresight", ModelKind::perfect_foresight}};

NheavyParams params_of(const json& cfg, const char* key) {
  if (cfg.at(key).is_null()) throw UsageError(std::string("missing required setting '") + key + "'");
  return params_from_json(cfg.at(key));
}

void write_manifest(const std::string& out, const std::string& command, const json& cfg, json extra = json::object()) {
  json m = {{"command", command}, {"version", kVersion}, {"config", cfg}, {"config_hash", fnv1a_hex(cfg.dump())}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_json(out + ".manifest.json", m);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_stationarity(const StationarityReport& r) {
  std::cerr << "spectral radius " << format_double(r.spectral_radius) << ", bound max(beta, alpha_r + lambda_r + beta_r) = "
            << format_double(r.bound) << (r.stationary ? " (stationary)" : " (not stationary)") << '\n';
}

// ---------------------------------------------------------------------------

void add_common(Settings& s) {
  s.add("seed", Kind::seed, default_seed(), "random seed (default from NHEAVY_SEED, else 1)");
}

void setup_gen_network(Settings& s) {
  s.add("kind", Kind::text, nullptr, "generator: dyad, powerlaw or sbm");
  s.add("n", Kind::integer, nullptr, "number of nodes");
  s.add("alpha", Kind::number, 2.0, "power-law exponent");
  s.add("k", Kind::integer, 5, "number of blocks for sbm");
  s.add("out", Kind::text, "network.csv", "output file (.json for network JSON, else edge CSV)");
  add_common(s);
}

int run_gen_network(const json& cfg) {
  const auto kind = choose(cfg, "kind", kNetworks);
  if (cfg.at("n").is_null()) throw UsageError("missing required setting 'n'");
  const int n = integer(cfg, "n");
  const double alpha = number(cfg, "alpha");
  const int k = integer(cfg, "k");
  const auto a = generate_network(kind, n, seed_of(cfg), alpha, k);
  const double expected = kind == NetworkKind::dyad       ? dyad_expected_density(n)
                          : kind == NetworkKind::powerlaw ? powerlaw_expected_density(n, alpha)
                                                          : sbm_expected_density(n, k);
  const auto out = text(cfg, "out");
  if (out.size() >= 5 && out.compare(out.size() - 5, 5, ".json") == 0) {
    write_json(out, network_to_json(a));
  } else {
    write_edges_csv(out, a);
  }
  const double empirical = density(a);
  std::cout << "nodes " << n << ", edges " << a.edge_count() << '\n'
            << "analytic density " << format_double(expected) << '\n'
            << "empirical density " << format_double(empirical) << '\n';
  write_manifest(out, "gen-network", cfg,
                 {{"seeds", {{"network", seed_of(cfg)}}},
                  {"density", {{"analytic", expected}, {"empirical", empirical}}}});
  return kOk;
}

void add_network_source(Settings& s) {
  s.add("network", Kind::text, nullptr, "network file (edge CSV or network JSON)");
}

void setup_simulate(Settings& s) {
  add_network_source(s);
  s.add("generator", Kind::text, nullptr, "generate the network instead: dyad, powerlaw or sbm");
  s.add("n", Kind::integer, nullptr, "number of assets when generating the network");
  s.add("alpha", Kind::number, 2.0, "power-law exponent");
  s.add("k", Kind::integer, 5, "number of blocks for sbm");
  s.add("params", Kind::object, nullptr, "true parameters {phi, phi_r}");
  s.add("t_len", Kind::integer, 500, "number of days");
  s.add("burn_in", Kind::integer, 500, "discarded initial days");
  s.add("pipeline", Kind::text, "direct", "direct (model draws) or full (diffusion, noise, realized measure)");
  s.add("returns_innovation", Kind::text, "chi_square_1", "return innovation law (direct pipeline)");
  s.add("returns_shape", Kind::number, 1.0, "gamma shape of the return innovation");
  s.add("measure_innovation", Kind::text, "gamma", "realized-measure innovation law");
  s.add("measure_shape", Kind::number, 4.0, "gamma shape of the realized-measure innovation");
  s.add("correlation", Kind::number, 0.0, "Gaussian-copula correlation of the innovations (direct pipeline)");
  s.add("kappa", Kind::number, 0.5, "cross-asset correlation decay of the diffusion");
  s.add("noise_sd", Kind::number, 0.001, "microstructure noise standard deviation");
  s.add("m_ticks", Kind::integer, 390, "intraday ticks per day");
  s.add("realized", Kind::text, "multiscale", "realized estimator: multiscale or naive");
  s.add("scales", Kind::integer, 0, "multi-scale K (0 = round(sqrt(M)))");
  s.add("out", Kind::text, "panel.csv", "panel CSV output");
  s.add("latent_out", Kind::text, "", "optional CSV of the latent h and mu");
  s.add("intraday_out", Kind::text, "", "optional CSV of noisy intraday log prices (full pipeline)");
  s.add("network_out", Kind::text, "", "optional edge CSV of a generated network");
  add_common(s);
}

AdjacencyMatrix network_of(const json& cfg) {
  return read_network(required_text(cfg, "network"));
}

int run_simulate(const json& cfg) {
  const auto seed = seed_of(cfg);
  AdjacencyMatrix a;
  if (!text(cfg, "network").empty()) {
    a = network_of(cfg);
  } else if (!text(cfg, "generator").empty()) {
    if (cfg.at("n").is_null()) throw UsageError("missing required setting 'n'");
    a = generate_network(choose(cfg, "generator", kNetworks), integer(cfg, "n"), seed, number(cfg, "alpha"),
                         integer(cfg, "k"));
    if (!text(cfg, "network_out").empty()) write_edges_csv(text(cfg, "network_out"), a);
  } else {
    throw UsageError("simulate needs either 'network' or 'generator'");
  }
  const auto w = normalize(a);
  const auto params = params_of(cfg, "params");
  const auto report = check_stationarity(params, w);
  if (!report.stationary) {
    std::cerr << "error: refusing to simulate nonstationary parameters\n";
    print_stationarity(report);
    return kData;
  }

  const auto pipeline = choose(cfg, "pipeline", kPipelines);
  const InnovationLaw measure{choose(cfg, "measure_innovation", kFamilies), number(cfg, "measure_shape")};
  const int t_len = integer(cfg, "t_len");
  PanelSeries panel;
  LatentPanels latent;
  if (pipeline == PipelineKind::direct) {
    InnovationSpec innov;
    innov.returns = {choose(cfg, "returns_innovation", kFamilies), number(cfg, "returns_shape")};
    innov.measure = measure;
    innov.correlation = number(cfg, "correlation");
    auto sim = simulate_nheavy(params, w, t_len, innov, integer(cfg, "burn_in"), seed);
    panel = std::move(sim.panel);
    latent = std::move(sim.latent);
  } else {
    PipelineSpec spec;
    spec.measure = measure;
    spec.kappa = number(cfg, "kappa");
    spec.noise_sd = number(cfg, "noise_sd");
    spec.m_ticks = integer(cfg, "m_ticks");
    spec.realized = {choose(cfg, "realized", kRealized), integer(cfg, "scales")};
    spec.burn_in = integer(cfg, "burn_in");
    IntradayPanel intraday;
    const bool keep = !text(cfg, "intraday_out").empty();
    auto sim = simulate_pipeline(params, w, t_len, spec, seed, keep ? &intraday : nullptr);
    if (keep) write_intraday_csv(text(cfg, "intraday_out"), intraday);
    panel = std::move(sim.panel);
    latent = std::move(sim.latent);
  }
  const auto out = text(cfg, "out");
  write_panel_csv(out, panel);
  if (!text(cfg, "latent_out").empty()) write_latent_csv(text(cfg, "latent_out"), latent);
  std::cout << "wrote " << panel.days() << " days x " << panel.assets() << " assets to " << out << '\n';
  write_manifest(out, "simulate", cfg,
                 {{"theta0", params_to_json(params)},
                  {"seeds", {{"base", seed},
                             {"network", seed},
                             {"innovations", derive_seed(seed, Stream::innovations)},
                             {"diffusion", derive_seed(seed, Stream::diffusion)},
                             {"noise", derive_seed(seed, Stream::noise)}}},
                  {"spectral_radius", report.spectral_radius}});
  return kOk;
}

void add_fit_settings(Settings& s) {
  s.add("estimator", Kind::text, "one_step", "one_step or two_step");
  s.add("init_rule", Kind::text, "sqrt_t", "likelihood start-up: sqrt_t or sample_mean");
  s.add("max_iterations", Kind::integer, 500, "optimizer iteration limit");
  s.add("gradient_tolerance", Kind::number, 1e-6, "optimizer gradient tolerance");
}

FitOptions fit_options_of(const json& cfg) {
  FitOptions o;
  o.init_rule = choose(cfg, "init_rule", kInitRules);
  o.optimizer.max_iterations = integer(cfg, "max_iterations");
  o.optimizer.gradient_tolerance = number(cfg, "gradient_tolerance");
  return o;
}

void setup_estimate(Settings& s) {
  s.add("panel", Kind::text, nullptr, "panel CSV (day,asset,r2,rm)");
  add_network_source(s);
  add_fit_settings(s);
  s.add("init", Kind::object, nullptr, "starting values {phi, phi_r}");
  s.add("covariance", Kind::boolean, true, "compute sandwich standard errors");
  s.add("out", Kind::text, "fit.json", "fit JSON output");
  s.add("strict", Kind::boolean, false, "exit with the convergence code when the optimizer fails");
}

int run_estimate(const json& cfg) {
  const auto panel = read_panel_csv(required_text(cfg, "panel"));
  const auto a = network_of(cfg);
  if (a.size() != panel.assets()) throw DataError("network size does not match the panel width");
  const auto w = normalize(a);
  const auto estimator = choose(cfg, "estimator", kEstimators);
  auto options = fit_options_of(cfg);
  options.compute_covariance = cfg.at("covariance").get<bool>();
  NheavyParams init = estimator == Estimator::one_step ? default_one_step_start() : default_two_step_start();
  if (!cfg.at("init").is_null()) {
    const auto& j = cfg.at("init");
    check_keys(j, {"phi", "phi_r"}, "init");
    init = {equation_from_json(j.at("phi"), estimator == Estimator::one_step),
            equation_from_json(j.at("phi_r"), estimator == Estimator::one_step)};
  }
  const auto fit = estimator == Estimator::one_step ? fit_one_step(panel, w, init, options)
                                                    : fit_two_step(panel, w, init, options);
  const auto out = text(cfg, "out");
  write_json(out, fit_to_json(fit));
  write_manifest(out, "estimate", cfg);

  const auto est = fit.estimates();
  std::cout << to_string(fit.estimator) << " fit, " << panel.days() << " days x " << panel.assets() << " assets\n";
  std::printf("%-10s %24s %24s\n", "parameter", "estimate", "std_error");
  for (std::size_t k = 0; k < fit.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const std::string se = i < fit.std_errors.size() ? format_double(fit.std_errors[i]) : "-";
    std::printf("%-10s %24s %24s\n", fit.labels[k].c_str(), format_double(est[i]).c_str(), se.c_str());
  }
  std::cout << "converged " << (fit.converged() ? "true" : "false") << ", iterations " << fit.iterations() << '\n';
  if (!fit.covariance_label.empty()) std::cout << "covariance: " << fit.covariance_label << '\n';
  for (const auto& warning : fit.warnings) std::cerr << "warning: " << warning << '\n';
  if (!fit.converged() && cfg.at("strict").get<bool>()) return kConvergence;
  return kOk;
}

void setup_forecast(Settings& s) {
  s.add("fit", Kind::text, nullptr, "fit JSON from estimate");
  add_network_source(s);
  s.add("horizon", Kind::integer, 10, "largest horizon S");
  s.add("state", Kind::object, nullptr, "next-day state {h, mu} overriding the fit's");
  s.add("out", Kind::text, "forecast.csv", "forecast CSV output");
}

int run_forecast(const json& cfg) {
  const auto fit = stored_fit_from_json(read_json(required_text(cfg, "fit")));
  const auto w = normalize(network_of(cfg));
  Eigen::VectorXd h = fit.h_next;
  Eigen::VectorXd mu = fit.mu_next;
  if (!cfg.at("state").is_null()) {
    const auto& st = cfg.at("state");
    check_keys(st, {"h", "mu"}, "state");
    if (!st.contains("h") || !st.contains("mu")) throw InvalidInput("state needs both h and mu");
    h = Eigen::Map<const Eigen::VectorXd>(st.at("h").get<std::vector<double>>().data(),
                                          static_cast<Eigen::Index>(st.at("h").size()));
    mu = Eigen::Map<const Eigen::VectorXd>(st.at("mu").get<std::vector<double>>().data(),
                                           static_cast<Eigen::Index>(st.at("mu").size()));
  }
  if (h.size() == 0 || mu.size() == 0) throw InvalidInput("no next-day state available for forecasting");
  if (h.size() != w.size() || mu.size() != w.size()) throw InvalidInput("state length does not match the network");
  const int horizon = integer(cfg, "horizon");
  if (horizon < 1) throw InvalidInput("horizon must be >= 1");
  const auto dyn = build_block_dynamics(fit.theta, fit.omega, fit.omega_r, w);

  const auto out = text(cfg, "out");
  std::ofstream f(out, std::ios::binary);
  if (!f) throw DataError("cannot open " + out + " for writing");
  f << "s,asset,h_forecast,mu_forecast\n";
  bool stationary = true;
  for (int s = 1; s <= horizon; ++s) {
    const auto fc = forecast_from_next_state(dyn, h, mu, s);
    stationary = stationary && fc.stationary;
    for (int i = 0; i < w.size(); ++i) {
      f << s << ',' << i << ',' << format_double(fc.h[i]) << ',' << format_double(fc.mu[i]) << '\n';
    }
  }
  if (!stationary) std::cerr << "warning: fitted dynamics are not stationary; forecasts do not converge\n";
  std::cout << "wrote horizons 1.." << horizon << " for " << w.size() << " assets to " << out << '\n';
  write_manifest(out, "forecast", cfg);
  return kOk;
}

void setup_backtest(Settings& s) {
  s.add("panel", Kind::text, nullptr, "panel CSV (day,asset,r2,rm)");
  add_network_source(s);
  s.add("models", Kind::text, "nheavy,ngarch", "comma list of nheavy, ngarch, perfect_foresight");
  add_fit_settings(s);
  s.add("protocol", Kind::text, "rolling", "rolling or fixed");
  s.add("window", Kind::integer, nullptr, "estimation window length");
  s.add("horizons", Kind::text, "1", "comma list of forecast horizons");
  s.add("floor", Kind::number, 1e-12, "floor applied to realized r2 in QLIKE");
  s.add("jobs", Kind::integer, 1, "worker threads");
  s.add("out", Kind::text, "backtest.csv", "report CSV output");
  s.add("json_out", Kind::text, "", "optional JSON summary");
}

int run_backtest(const json& cfg) {
  const auto panel = read_panel_csv(required_text(cfg, "panel"));
  const auto a = network_of(cfg);
  if (a.size() != panel.assets()) throw DataError("network size does not match the panel width");
  const auto w = normalize(a);
  if (cfg.at("window").is_null()) throw UsageError("missing required setting 'window'");

  std::vector<ModelKind> models;
  for (const auto& m : split(text(cfg, "models"))) models.push_back(choose(json{{"model", m}}, "model", kModels));
  std::vector<int> horizons;
  for (const auto& h : split(text(cfg, "horizons"))) {
    try {
      horizons.push_back(std::stoi(h));
    } catch (const std::exception&) {
      throw UsageError("bad horizon '" + h + "'");
    }
  }
  if (models.empty() || horizons.empty()) throw UsageError("need at least one model and one horizon");

  BacktestSpec spec;
  spec.estimator = choose(cfg, "estimator", kEstimators);
  spec.protocol = choose(cfg, "protocol", kProtocols);
  spec.window = integer(cfg, "window");
  spec.fit = fit_options_of(cfg);
  spec.fit.compute_covariance = false;
  spec.floor = number(cfg, "floor");
  spec.jobs = integer(cfg, "jobs");

  const auto out = text(cfg, "out");
  std::ofstream f(out, std::ios::binary);
  if (!f) throw DataError("cannot open " + out + " for writing");
  f << "model,estimator,protocol,window,horizon,origins,asset,qlike\n";
  json summary = json::array();
  for (const auto m : models) {
    for (const int h : horizons) {
      spec.model = m;
      spec.horizon = h;
      const auto r = rolling_backtest(panel, w, spec);
      for (int i = 0; i < panel.assets(); ++i) {
        f << to_string(r.model) << ',' << to_string(r.estimator) << ',' << to_string(r.protocol) << ',' << r.window
          << ',' << r.horizon << ',' << r.origins << ',' << i << ',' << format_double(r.per_asset[i]) << '\n';
      }
      std::cout << to_string(m) << " s=" << h << " origins=" << r.origins << " mean_qlike=" << format_double(r.mean)
                << " floor_hits=" << r.floor_hits << " unconverged=" << r.unconverged_fits << '\n';
      summary.push_back(backtest_to_json(r));
    }
  }
  if (!text(cfg, "json_out").empty()) write_json(text(cfg, "json_out"), summary);
  write_manifest(out, "backtest", cfg);
  return kOk;
}

void setup_rmse_table(Settings& s) {
  s.add("generator", Kind::text, "dyad", "network generator: dyad, powerlaw or sbm");
  s.add("n", Kind::integer, 25, "number of assets");
  s.add("alpha", Kind::number, 2.0, "power-law exponent");
  s.add("k", Kind::integer, 5, "number of blocks for sbm");
  s.add("t_len", Kind::integer, 100, "days per replication");
  s.add("params", Kind::object, params_to_json(default_one_step_start()), "true parameters {phi, phi_r}");
  s.add("q_reps", Kind::integer, 100, "number of replications");
  s.add("estimator", Kind::text, "one_step", "one_step or two_step");
  s.add("pipeline", Kind::text, "full", "full or direct");
  s.add("m_ticks", Kind::integer, 390, "intraday ticks per day");
  s.add("noise_sd", Kind::number, 0.001, "microstructure noise standard deviation");
  s.add("kappa", Kind::number, 0.5, "cross-asset correlation decay of the diffusion");
  s.add("realized", Kind::text, "multiscale", "realized estimator: multiscale or naive");
  s.add("scales", Kind::integer, 0, "multi-scale K (0 = round(sqrt(M)))");
  s.add("measure_shape", Kind::number, 4.0, "gamma shape of the realized-measure innovation");
  s.add("burn_in", Kind::integer, 500, "discarded initial days");
  s.add("covariance", Kind::boolean, false, "compute sandwich standard errors per replication");
  s.add("jobs", Kind::integer, 1, "worker threads");
  s.add("out", Kind::text, "rmse.csv", "table CSV output");
  s.add("json_out", Kind::text, "", "optional JSON summary");
  add_common(s);
}

int run_rmse_table(const json& cfg) {
  HarnessDesign d;
  d.generator = choose(cfg, "generator", kNetworks);
  d.powerlaw_alpha = number(cfg, "alpha");
  d.sbm_blocks = integer(cfg, "k");
  d.n = integer(cfg, "n");
  d.t_len = integer(cfg, "t_len");
  d.theta0 = params_of(cfg, "params");
  d.q_reps = integer(cfg, "q_reps");
  d.estimator = choose(cfg, "estimator", kEstimators);
  d.pipeline = choose(cfg, "pipeline", kPipelines);
  d.pipeline_spec.measure = {InnovationFamily::gamma, number(cfg, "measure_shape")};
  d.pipeline_spec.m_ticks = integer(cfg, "m_ticks");
  d.pipeline_spec.noise_sd = number(cfg, "noise_sd");
  d.pipeline_spec.kappa = number(cfg, "kappa");
  d.pipeline_spec.realized = {choose(cfg, "realized", kRealized), integer(cfg, "scales")};
  d.pipeline_spec.burn_in = integer(cfg, "burn_in");
  d.innovations.measure = d.pipeline_spec.measure;
  d.burn_in = integer(cfg, "burn_in");
  d.fit.compute_covariance = cfg.at("covariance").get<bool>();
  d.jobs = integer(cfg, "jobs");
  const auto t = rmse_harness(d, seed_of(cfg));

  const auto out = text(cfg, "out");
  std::ofstream f(out, std::ios::binary);
  if (!f) throw DataError("cannot open " + out + " for writing");
  f << "parameter,truth,mean_estimate,rmse,mc_se\n";
  for (std::size_t k = 0; k < t.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    f << t.labels[k] << ',' << format_double(t.truth[i]) << ',' << format_double(t.mean_estimate[i]) << ','
      << format_double(t.rmse[i]) << ',' << format_double(t.mc_se[i]) << '\n';
  }
  std::printf("%-10s %24s %24s\n", "parameter", "truth", "rmse");
  for (std::size_t k = 0; k < t.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    std::printf("%-10s %24s %24s\n", t.labels[k].c_str(), format_double(t.truth[i]).c_str(),
                format_double(t.rmse[i]).c_str());
  }
  std::cout << "mean density " << format_double(t.mean_density) << ", replications " << t.successes << " ok, "
            << t.failures << " failed, " << t.unconverged << " unconverged\n";
  if (!text(cfg, "json_out").empty()) write_json(text(cfg, "json_out"), harness_to_json(t));
  write_manifest(out, "rmse-table", cfg, {{"seeds", {{"base", seed_of(cfg)}}}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network HEAVY volatility model: simulation, estimation, forecasting and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  struct Command {
    std::string name;
    std::string help;
    void (*setup)(Settings&);
    int (*run)(const json&);
  };
  const std::vector<Command> commands = {
      {"gen-network", "generate a random network and report its density", setup_gen_network, run_gen_network},
      {"simulate", "simulate a daily panel of squared returns and realized measures", setup_simulate, run_simulate},
      {"estimate", "fit the model by quasi-maximum likelihood", setup_estimate, run_estimate},
      {"forecast", "multistep forecasts from a stored fit", setup_forecast, run_forecast},
      {"backtest", "out-of-sample QLIKE evaluation", setup_backtest, run_backtest},
      {"rmse-table", "Monte Carlo parameter-recovery table", setup_rmse_table, run_rmse_table},
  };

  std::vector<std::unique_ptr<Settings>> settings;
  std::vector<CLI::App*> subs;
  try {
    for (const auto& c : commands) {
      auto* sub = app.add_subcommand(c.name, c.help);
      settings.push_back(std::make_unique<Settings>(sub));
      c.setup(*settings.back());
      subs.push_back(sub);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    for (std::size_t k = 0; k < commands.size(); ++k) {
      if (subs[k]->parsed()) return commands[k].run(settings[k]->resolve());
    }
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kData;
  } catch (const json::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
