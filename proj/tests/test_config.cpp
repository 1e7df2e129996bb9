#include <string>

#include "doctest.h"
#include "nvspin/config.hpp"
#include "nvspin/errors.hpp"

using namespace nvspin;

TEST_CASE("printing a parsed config is idempotent") {
  const std::string a = print_config(RunConfig());
  const RunConfig c = parse_config(a);
  CHECK(print_config(c) == a);
  CHECK(config_hash(c) == config_hash(RunConfig()));
}

TEST_CASE("overrides survive a round trip") {
  const RunConfig c = parse_config(R"({"geometry": {"standoff_m": 2.5e-6},
                                       "frame": {"theta_rad": 0.7},
                                       "quadrature": {"threads": 3},
                                       "spectrum": {"peaks": [{"lambda_c_m": 1e-6, "gamma_w_m": 1e-7, "amplitude": 2e-6}]},
                                       "seed": 42})");
  CHECK(c.experiment.geometry.standoff == 2.5e-6);
  CHECK(c.experiment.frame.theta() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(c.spectrum.peaks.size() == 1);
  CHECK(c.seed == 42);
  const std::string p = print_config(c);
  CHECK(print_config(parse_config(p)) == p);
}

TEST_CASE("thread count does not change the config hash") {
  RunConfig a, b;
  b.experiment.quadrature.threads = 7;
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("unknown keys and wrong types name the key") {
  try {
    parse_config(R"({"geometry": {"radius_um": 250}})");
    FAIL("accepted an unknown key");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("radius_um") != std::string::npos);
  }
  try {
    parse_config(R"({"timing": {"tau_s": "long"}})");
    FAIL("accepted a string for a number");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("tau_s") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("{not json"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"geometry": {"radius_m": -1}})"), ValidationError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("distance and velocity datasets") {
  const auto d = parse_distance_csv("# transcribed\nd_m,bbar_nT,sigma_nT\n1e-6,-50,1\n\n2e-6,-30,1.5\n");
  REQUIRE(d.rows.size() == 2);
  CHECK(d.rows[1].bbar == doctest::Approx(-30e-9));
  CHECK(d.rows[1].sigma == doctest::Approx(1.5e-9));
  CHECK_THROWS_AS(parse_distance_csv("d,bbar,sigma\n1,2,3\n"), ValidationError);
  CHECK_THROWS_AS(parse_distance_csv("d_m,bbar_nT,sigma_nT\n1e-6,x,1\n"), ValidationError);
  CHECK_THROWS_AS(parse_distance_csv("d_m,bbar_nT,sigma_nT\n1e-6,-50\n"), ValidationError);
  const auto v = parse_velocity_csv("vmax_mps,bbar_nT,sigma_nT\n0.05,-49,1\n");
  CHECK(v.kind == DatasetKind::velocity);
  CHECK(v.rows[0].abscissa == 0.05);
}

TEST_CASE("prior tables") {
  const auto p = parse_prior_csv("lambda_m,f_perp_limit\n1e-6,1e-3\n1e-4,1e-7\n");
  CHECK(p.size() == 2);
  CHECK_THROWS_AS(parse_prior_csv("lambda_m,f_perp_limit\n"), ValidationError);
}

TEST_CASE("tables render with full precision") {
  Table t{{"a", "b"}, {{0.1, 1.0 / 3.0}}};
  CHECK(t.to_csv() == "a,b\n0.10000000000000001,0.33333333333333331\n");
  CHECK(t.to_json().find("\"a\"") != std::string::npos);
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("hashing") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(255) == "00000000000000ff");
}
