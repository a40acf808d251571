#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nheavy/estimation.hpp"
#include "nheavy/evaluation.hpp"
#include "nheavy/model.hpp"
#include "nheavy/network.hpp"
#include "nheavy/realized.hpp"

namespace nheavy {

inline constexpr const char* kVersion = "0.1.0";

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double v);

/// Edge list with header `src,dst` (0-based node ids).
void write_edges_csv(const std::string& path, const AdjacencyMatrix& a);
/// n < 0 infers the node count from the largest id.
AdjacencyMatrix read_edges_csv(const std::string& path, int n = -1);

/// {"n": N, "edges": [[src, dst], ...]}
nlohmann::json network_to_json(const AdjacencyMatrix& a);
AdjacencyMatrix network_from_json(const nlohmann::json& j);

/// `.json` files hold network JSON, anything else an edge CSV.
AdjacencyMatrix read_network(const std::string& path, int n = -1);

/// Long format `day,asset,r2,rm`, 0-based indices, every cell exactly once.
void write_panel_csv(const std::string& path, const PanelSeries& panel);
PanelSeries read_panel_csv(const std::string& path);

/// `day,asset,h,mu`
void write_latent_csv(const std::string& path, const LatentPanels& latent);

/// `day,tick,asset,logprice`; the starting price is written as day -1, tick M - 1.
/// Without day -1 rows the reader starts from the first tick of day 0.
void write_intraday_csv(const std::string& path, const IntradayPanel& p);
IntradayPanel read_intraday_csv(const std::string& path);

/// {"phi": {omega, alpha, lambda, beta}, "phi_r": {...}}
nlohmann::json params_to_json(const NheavyParams& p);
NheavyParams params_from_json(const nlohmann::json& j);
nlohmann::json equation_to_json(const EquationParams& p);
EquationParams equation_from_json(const nlohmann::json& j, bool require_omega = true);

nlohmann::json fit_to_json(const FitResult& fit);
/// Reads what fit_to_json writes: parameters, per-asset intercepts and the next-day state.
struct StoredFit {
  Estimator estimator = Estimator::one_step;
  NheavyParams theta;
  Eigen::VectorXd omega, omega_r, h_next, mu_next;
};
StoredFit stored_fit_from_json(const nlohmann::json& j);

nlohmann::json backtest_to_json(const BacktestReport& r);
nlohmann::json harness_to_json(const HarnessTable& t);

/// FNV-1a 64-bit hash of a string, hex encoded.
std::string fnv1a_hex(const std::string& s);

/// Writes a JSON document with 2-space indentation and a trailing newline.
void write_json(const std::string& path, const nlohmann::json& j);
/// Throws DataError with the file name on a parse failure.
nlohmann::json read_json(const std::string& path);

/// Rejects keys of `j` not listed in `allowed`, naming the first offender and `context`.
void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed, const std::string& context);

}  // namespace nheavy
