#include "nheavy/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "nheavy/errors.hpp"

namespace nheavy {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  return out;
}

/// Line-oriented reader for small comma-separated files with a fixed header.
class CsvReader {
 public:
  CsvReader(const std::string& path, const std::string& header) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open " + path);
    std::string line;
    if (!next_line(line)) throw DataError(path + ": empty file");
    if (line != header) throw DataError(where() + "expected header '" + header + "', got '" + line + "'");
  }

  /// Next non-empty row split on commas; false at end of file.
  bool row(std::vector<std::string>& fields) {
    std::string line;
    while (next_line(line)) {
      if (line.empty()) continue;
      fields.clear();
      std::stringstream ss(line);
      std::string f;
      while (std::getline(ss, f, ',')) fields.push_back(f);
      if (!line.empty() && line.back() == ',') fields.emplace_back();
      return true;
    }
    return false;
  }

  void expect_fields(const std::vector<std::string>& fields, std::size_t n) const {
    if (fields.size() != n) {
      throw DataError(where() + "expected " + std::to_string(n) + " fields, got " + std::to_string(fields.size()));
    }
  }

  int to_int(const std::string& s) const {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError(where() + "bad integer '" + s + "'");
    return v;
  }

  double to_double(const std::string& s) const {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
      throw DataError(where() + "bad number '" + s + "'");
    }
    return v;
  }

  std::string where() const { return path_ + ":" + std::to_string(line_) + ": "; }

 private:
  bool next_line(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::string path_;
  std::ifstream in_;
  int line_ = 0;
};

Eigen::VectorXd vector_from_json(const json& j, const char* name) {
  if (!j.is_array()) throw DataError(std::string(name) + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_to_json(m.row(i).transpose()));
  return a;
}

/// NaN has no JSON encoding; it is written as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json diagnostics_to_json(const EquationDiagnostics& d) {
  return {{"converged", d.converged},     {"iterations", d.iterations}, {"evaluations", d.evaluations},
          {"gradient_norm", d.gradient_norm}, {"message", d.message},   {"qll", d.qll.value}};
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_edges_csv(const std::string& path, const AdjacencyMatrix& a) {
  auto out = open_out(path);
  out << "src,dst\n";
  for (const auto& [i, j] : a.edges()) out << i << ',' << j << '\n';
}

AdjacencyMatrix read_edges_csv(const std::string& path, int n) {
  CsvReader csv(path, "src,dst");
  std::vector<Edge> edges;
  std::vector<std::string> f;
  int max_id = -1;
  while (csv.row(f)) {
    csv.expect_fields(f, 2);
    const int i = csv.to_int(f[0]);
    const int j = csv.to_int(f[1]);
    if (i < 0 || j < 0) throw DataError(csv.where() + "negative node id");
    if (n >= 0 && (i >= n || j >= n)) throw DataError(csv.where() + "node id out of range for n = " + std::to_string(n));
    if (i == j) throw DataError(csv.where() + "self-loop");
    max_id = std::max({max_id, i, j});
    edges.emplace_back(i, j);
  }
  return AdjacencyMatrix::from_edges(n >= 0 ? n : max_id + 1, edges);
}

json network_to_json(const AdjacencyMatrix& a) {
  json edges = json::array();
  for (const auto& [i, j] : a.edges()) edges.push_back({i, j});
  return {{"n", a.size()}, {"edges", edges}};
}

AdjacencyMatrix network_from_json(const json& j) {
  try {
    check_keys(j, {"n", "edges"}, "network");
    const int n = j.at("n").get<int>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw DataError("network edges must be [src, dst] pairs");
      edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    return AdjacencyMatrix::from_edges(n, edges);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed network JSON: ") + e.what());
  } catch (const InvalidInput& e) {
    throw DataError(std::string("invalid network: ") + e.what());
  }
}

AdjacencyMatrix read_network(const std::string& path, int n) {
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    auto a = network_from_json(read_json(path));
    if (n >= 0 && a.size() != n) throw DataError(path + ": network has " + std::to_string(a.size()) + " nodes");
    return a;
  }
  try {
    return read_edges_csv(path, n);
  } catch (const InvalidInput& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_panel_csv(const std::string& path, const PanelSeries& panel) {
  auto out = open_out(path);
  out << "day,asset,r2,rm\n";
  for (int t = 0; t < panel.days(); ++t) {
    for (int i = 0; i < panel.assets(); ++i) {
      out << t << ',' << i << ',' << format_double(panel.r2(t, i)) << ',' << format_double(panel.rm(t, i)) << '\n';
    }
  }
}

PanelSeries read_panel_csv(const std::string& path) {
  CsvReader csv(path, "day,asset,r2,rm");
  std::map<std::pair<int, int>, std::pair<double, double>> cells;
  std::vector<std::string> f;
  int days = 0;
  int assets = 0;
  while (csv.row(f)) {
    csv.expect_fields(f, 4);
    const int t = csv.to_int(f[0]);
    const int i = csv.to_int(f[1]);
    if (t < 0 || i < 0) throw DataError(csv.where() + "negative index");
    const double r2 = csv.to_double(f[2]);
    const double rm = csv.to_double(f[3]);
    if (r2 < 0.0 || rm < 0.0) throw DataError(csv.where() + "negative r2 or rm");
    if (!cells.emplace(std::make_pair(t, i), std::make_pair(r2, rm)).second) {
      throw DataError(csv.where() + "duplicate cell (" + f[0] + ", " + f[1] + ")");
    }
    days = std::max(days, t + 1);
    assets = std::max(assets, i + 1);
  }
  if (cells.empty()) throw DataError(path + ": no data rows");
  if (cells.size() != static_cast<std::size_t>(days) * assets) {
    throw DataError(path + ": panel is incomplete (" + std::to_string(cells.size()) + " of " +
                    std::to_string(static_cast<long>(days) * assets) + " cells)");
  }
  PanelSeries panel{Panel(days, assets), Panel(days, assets)};
  for (const auto& [key, v] : cells) {
    panel.r2(key.first, key.second) = v.first;
    panel.rm(key.first, key.second) = v.second;
  }
  return panel;
}

void write_latent_csv(const std::string& path, const LatentPanels& latent) {
  auto out = open_out(path);
  out << "day,asset,h,mu\n";
  for (Eigen::Index t = 0; t < latent.h.rows(); ++t) {
    for (Eigen::Index i = 0; i < latent.h.cols(); ++i) {
      out << t << ',' << i << ',' << format_double(latent.h(t, i)) << ',' << format_double(latent.mu(t, i)) << '\n';
    }
  }
}

void write_intraday_csv(const std::string& path, const IntradayPanel& p) {
  auto out = open_out(path);
  out << "day,tick,asset,logprice\n";
  for (int i = 0; i < p.n; ++i) out << -1 << ',' << p.m_ticks - 1 << ',' << i << ',' << format_double(p.start[i]) << '\n';
  for (int l = 0; l < p.l_days; ++l) {
    for (int m = 0; m < p.m_ticks; ++m) {
      for (int i = 0; i < p.n; ++i) out << l << ',' << m << ',' << i << ',' << format_double(p.at(l, m, i)) << '\n';
    }
  }
}

IntradayPanel read_intraday_csv(const std::string& path) {
  CsvReader csv(path, "day,tick,asset,logprice");
  std::map<std::tuple<int, int, int>, double> cells;
  std::map<int, double> start;
  std::vector<std::string> f;
  int days = 0;
  int ticks = 0;
  int assets = 0;
  while (csv.row(f)) {
    csv.expect_fields(f, 4);
    const int l = csv.to_int(f[0]);
    const int m = csv.to_int(f[1]);
    const int i = csv.to_int(f[2]);
    const double v = csv.to_double(f[3]);
    if (l < -1 || m < 0 || i < 0) throw DataError(csv.where() + "negative index");
    assets = std::max(assets, i + 1);
    if (l == -1) {
      if (!start.emplace(i, v).second) throw DataError(csv.where() + "duplicate starting price");
      continue;
    }
    if (!cells.emplace(std::make_tuple(l, m, i), v).second) throw DataError(csv.where() + "duplicate tick");
    days = std::max(days, l + 1);
    ticks = std::max(ticks, m + 1);
  }
  if (cells.empty()) throw DataError(path + ": no data rows");
  if (cells.size() != static_cast<std::size_t>(days) * ticks * assets) {
    throw DataError(path + ": intraday grid is incomplete or irregular");
  }
  IntradayPanel p(days, ticks, assets);
  for (const auto& [key, v] : cells) p.at(std::get<0>(key), std::get<1>(key), std::get<2>(key)) = v;
  for (int i = 0; i < assets; ++i) {
    const auto it = start.find(i);
    p.start[i] = it != start.end() ? it->second : p.at(0, 0, i);
  }
  return p;
}

json equation_to_json(const EquationParams& p) {
  return {{"omega", number(p.omega)}, {"alpha", p.alpha}, {"lambda", p.lambda}, {"beta", p.beta}};
}

EquationParams equation_from_json(const json& j, bool require_omega) {
  try {
    check_keys(j, {"omega", "alpha", "lambda", "beta"}, "equation parameters");
    EquationParams p;
    if (j.contains("omega") && !j.at("omega").is_null()) {
      p.omega = j.at("omega").get<double>();
    } else if (require_omega) {
      throw DataError("missing omega");
    } else {
      p.omega = std::numeric_limits<double>::quiet_NaN();
    }
    p.alpha = j.at("alpha").get<double>();
    p.lambda = j.at("lambda").get<double>();
    p.beta = j.at("beta").get<double>();
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed equation parameters: ") + e.what());
  }
}

json params_to_json(const NheavyParams& p) {
  return {{"phi", equation_to_json(p.phi)}, {"phi_r", equation_to_json(p.phi_r)}};
}

NheavyParams params_from_json(const json& j) {
  check_keys(j, {"phi", "phi_r"}, "parameters");
  if (!j.contains("phi") || !j.contains("phi_r")) throw DataError("parameters need both phi and phi_r");
  return {equation_from_json(j.at("phi")), equation_from_json(j.at("phi_r"))};
}

json fit_to_json(const FitResult& fit) {
  json se = json::object();
  for (std::size_t k = 0; k < fit.labels.size() && static_cast<Eigen::Index>(k) < fit.std_errors.size(); ++k) {
    se[fit.labels[k]] = fit.std_errors[static_cast<Eigen::Index>(k)];
  }
  json j = {
      {"estimator", to_string(fit.estimator)},
      {"converged", fit.converged()},
      {"iterations", fit.iterations()},
      {"theta", params_to_json(fit.theta_hat)},
      {"labels", fit.labels},
      {"estimates", vector_to_json(fit.estimates())},
      {"std_errors", se},
      {"cov", matrix_to_json(fit.cov)},
      {"covariance_label", fit.covariance_label},
      {"kappa2", {{"r", fit.kappa2.r}, {"rm", fit.kappa2.rm}, {"cross", fit.kappa2.cross}}},
      {"omega", vector_to_json(fit.omega)},
      {"omega_r", vector_to_json(fit.omega_r)},
      {"h_next", vector_to_json(fit.h_next)},
      {"mu_next", vector_to_json(fit.mu_next)},
      {"returns", diagnostics_to_json(fit.returns)},
      {"measure", diagnostics_to_json(fit.measure)},
      {"warnings", fit.warnings},
  };
  if (fit.moments) {
    j["moments"] = {{"mu", vector_to_json(fit.moments->mu)},
                    {"mu_r", vector_to_json(fit.moments->mu_r)},
                    {"kappa", vector_to_json(fit.moments->kappa)}};
  }
  return j;
}

StoredFit stored_fit_from_json(const json& j) {
  try {
    StoredFit s;
    const auto est = j.at("estimator").get<std::string>();
    if (est == "one_step") {
      s.estimator = Estimator::one_step;
    } else if (est == "two_step") {
      s.estimator = Estimator::two_step;
    } else {
      throw DataError("unknown estimator '" + est + "'");
    }
    const auto& th = j.at("theta");
    s.theta = {equation_from_json(th.at("phi"), false), equation_from_json(th.at("phi_r"), false)};
    s.omega = vector_from_json(j.at("omega"), "omega");
    s.omega_r = vector_from_json(j.at("omega_r"), "omega_r");
    s.h_next = vector_from_json(j.at("h_next"), "h_next");
    s.mu_next = vector_from_json(j.at("mu_next"), "mu_next");
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fit JSON: ") + e.what());
  }
}

json backtest_to_json(const BacktestReport& r) {
  return {{"model", to_string(r.model)},
          {"estimator", to_string(r.estimator)},
          {"protocol", to_string(r.protocol)},
          {"window", r.window},
          {"horizon", r.horizon},
          {"origins", r.origins},
          {"mean_qlike", r.mean},
          {"per_asset_qlike", vector_to_json(r.per_asset)},
          {"floor_hits", r.floor_hits},
          {"unconverged_fits", r.unconverged_fits}};
}

json harness_to_json(const HarnessTable& t) {
  json failures = json::array();
  for (std::size_t q = 0; q < t.replications.size(); ++q) {
    if (!t.replications[q].ok) failures.push_back({{"replication", q}, {"error", t.replications[q].error}});
  }
  json rmse = json::object();
  json mean = json::object();
  json truth = json::object();
  for (std::size_t k = 0; k < t.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    rmse[t.labels[k]] = number(t.rmse[i]);
    mean[t.labels[k]] = number(t.mean_estimate[i]);
    truth[t.labels[k]] = t.truth[i];
  }
  return {{"rmse", rmse},
          {"mean_estimate", mean},
          {"truth", truth},
          {"mean_density", number(t.mean_density)},
          {"successes", t.successes},
          {"failures", t.failures},
          {"unconverged", t.unconverged},
          {"failed_replications", failures}};
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_json(const std::string& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& context) {
  if (!j.is_object()) throw DataError(context + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw DataError("unknown key '" + key + "' in " + context);
    }
  }
}

}  // namespace nheavy
