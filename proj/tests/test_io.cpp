#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <limits>
#include <string>

#include "nheavy/errors.hpp"
#include "nheavy/io.hpp"

using namespace nheavy;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nheavy_test_io";
  fs::create_directories(dir);
  return (dir / name).string();
}

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("doubles round-trip through text") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, -2.5e-7}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("edge list round trip") {
  const auto a = gen_dyad(25, 3);
  const auto path = temp_path("edges.csv");
  write_edges_csv(path, a);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "src,dst");
  CHECK(read_edges_csv(path, 25) == a);
  CHECK(network_from_json(network_to_json(a)) == a);

  const auto jpath = temp_path("net.json");
  write_json(jpath, network_to_json(a));
  CHECK(read_network(jpath) == a);
  CHECK(read_network(path, 25) == a);

  write_text(path, "src,dst\n0,1\n2,2\n");
  CHECK(error_of([&] { read_edges_csv(path); }).find(":3:") != std::string::npos);
  write_text(path, "from,to\n0,1\n");
  CHECK(error_of([&] { read_edges_csv(path); }).find(":1:") != std::string::npos);
  write_text(path, "src,dst\n0,x\n");
  CHECK(error_of([&] { read_edges_csv(path); }).find("bad integer") != std::string::npos);
  write_text(path, "src,dst\n0,5\n");
  CHECK_THROWS_AS(read_edges_csv(path, 3), DataError);
}

TEST_CASE("panel round trip and validation") {
  PanelSeries p{Panel(3, 2), Panel(3, 2)};
  p.r2 << 0.1, 1.0 / 3.0, 2.0, 1e-9, 0.0, 5.5;
  p.rm << 0.2, 0.3, 0.4, 0.5, 0.6, 0.7;
  const auto path = temp_path("panel.csv");
  write_panel_csv(path, p);
  const auto q = read_panel_csv(path);
  CHECK(q.r2 == p.r2);
  CHECK(q.rm == p.rm);

  write_text(path, "day,asset,r2,rm\n0,0,1,1\n0,1,1,1\n1,0,1,1\n");
  CHECK(error_of([&] { read_panel_csv(path); }).find("incomplete") != std::string::npos);
  write_text(path, "day,asset,r2,rm\n0,0,1,1\n0,0,1,1\n");
  CHECK(error_of([&] { read_panel_csv(path); }).find(":3:") != std::string::npos);
  write_text(path, "day,asset,r2,rm\n0,0,-1,1\n");
  CHECK(error_of([&] { read_panel_csv(path); }).find(":2: negative") != std::string::npos);
  write_text(path, "day,asset,r2,rm\n0,0,1\n");
  CHECK(error_of([&] { read_panel_csv(path); }).find("expected 4 fields") != std::string::npos);
  write_text(path, "day,asset,r2,rm\n0,0,nan,1\n");
  CHECK_THROWS_AS(read_panel_csv(path), DataError);
  CHECK_THROWS_AS(read_panel_csv(temp_path("missing.csv")), DataError);
}

TEST_CASE("intraday round trip") {
  const auto spec = make_diffusion_spec(Eigen::Vector2d(0.5, 0.2));
  auto p = simulate_diffusion(spec, 3, 5, 1);
  p.start << 0.25, -0.5;
  const auto path = temp_path("intraday.csv");
  write_intraday_csv(path, p);
  const auto q = read_intraday_csv(path);
  CHECK(q.l_days == 3);
  CHECK(q.m_ticks == 5);
  CHECK(q.n == 2);
  CHECK(q.logp == p.logp);
  CHECK(q.start == p.start);

  write_text(path, "day,tick,asset,logprice\n0,0,0,0.1\n0,2,0,0.2\n");
  CHECK(error_of([&] { read_intraday_csv(path); }).find("irregular") != std::string::npos);
}

TEST_CASE("parameter and fit JSON") {
  const NheavyParams p{{0.05, 0.3, 0.2, 0.5}, {0.04, 0.3, 0.2, 0.4}};
  const auto back = params_from_json(params_to_json(p));
  CHECK(back.phi.omega == p.phi.omega);
  CHECK(back.phi_r.beta == p.phi_r.beta);
  nlohmann::json bad = params_to_json(p);
  bad["phi"].erase("omega");
  CHECK_THROWS(params_from_json(bad));
  EquationParams no_omega{std::numeric_limits<double>::quiet_NaN(), 0.1, 0.2, 0.3};
  const auto j = equation_to_json(no_omega);
  CHECK(j["omega"].is_null());
  CHECK(std::isnan(equation_from_json(j, false).omega));

  const auto w = normalize(gen_sbm(6, 2, 2));
  const auto sim = simulate_nheavy(p, w, 300, InnovationSpec{}, 100, 4);
  for (auto est : {Estimator::one_step, Estimator::two_step}) {
    const auto fit = est == Estimator::one_step ? fit_one_step(sim.panel, w, default_one_step_start())
                                                : fit_two_step(sim.panel, w, default_two_step_start());
    const auto stored = stored_fit_from_json(fit_to_json(fit));
    CHECK(stored.estimator == est);
    CHECK(stored.theta.phi.alpha == fit.theta_hat.phi.alpha);
    CHECK(stored.omega == fit.omega);
    CHECK(stored.mu_next == fit.mu_next);
    CHECK(fit_to_json(fit).contains("std_errors"));
  }
}

TEST_CASE("json helpers") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  const nlohmann::json j = {{"n", 3}, {"bogus", 1}};
  CHECK_NOTHROW(check_keys(j, {"n", "bogus"}, "config"));
  CHECK_THROWS(check_keys(j, {"n"}, "config"));
  const auto path = temp_path("broken.json");
  write_text(path, "{\"n\": ");
  CHECK(error_of([&] { read_json(path); }).find("broken.json") != std::string::npos);
}
