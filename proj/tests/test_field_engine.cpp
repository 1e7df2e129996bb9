#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nvspin/errors.hpp"
#include "nvspin/field_engine.hpp"

using namespace nvspin;

namespace {

double peak_time(const Experiment& ex) { return 0.5 * ex.vibration.half_period(); }

}  // namespace

TEST_CASE("short range matches the half-space limit") {
  Experiment ex;
  for (double lam : {1e-8, 3e-8, 1e-7}) {
    const CouplingPoint cp{lam, 1e-6};
    const double t = peak_time(ex);
    const auto b = integrate_field(ex, cp, t);
    const double pref = exotic_field_prefactor(ex.constants);
    const double half_space = -cp.f_perp * source_velocity(ex.vibration, t) * pref *
                              ex.geometry.nucleon_density * ex.frame.cos_theta() * 2.0 * pi * lam *
                              std::exp(-ex.geometry.standoff / lam);
    CHECK(b.value == doctest::Approx(half_space).epsilon(1e-5));
  }
}

TEST_CASE("quadrature agrees with the Monte-Carlo oracle") {
  Experiment ex;
  ex.quadrature.mc_samples = 2'000'000;
  const CouplingPoint cp{3.82e-7, 4.83e-6};
  const double t = peak_time(ex);
  const auto q = integrate_field(ex, cp, t);
  const auto mc = mc_field_oracle(ex, cp, t);
  CHECK(mc.accepted > 0);
  CHECK(std::abs(q.value - mc.mean) <= 3.0 * (q.error_bound + mc.std_error + mc.truncation_bound));
}

TEST_CASE("Monte-Carlo oracle is deterministic per seed") {
  Experiment ex;
  ex.quadrature.mc_samples = 100000;
  const CouplingPoint cp{1e-6, 1e-6};
  const auto a = mc_field_oracle(ex, cp, 1e-6);
  const auto b = mc_field_oracle(ex, cp, 1e-6);
  CHECK(a.mean == b.mean);
  ex.quadrature.mc_samples = 100;
  CHECK_THROWS_AS(mc_field_oracle(ex, cp, 1e-6), ValidationError);
}

TEST_CASE("field reverses after half a vibration period") {
  Experiment ex;
  const CouplingPoint cp{8.07e-6, 3.93e-8};
  for (double t : {0.7e-6, 2.1e-6, 5.0e-6}) {
    const auto a = integrate_field(ex, cp, t);
    const auto b = integrate_field(ex, cp, t + ex.vibration.half_period());
    CHECK(b.value == doctest::Approx(-a.value).epsilon(1e-6));
  }
}

TEST_CASE("field scales with coupling and vanishes at rest") {
  Experiment ex;
  const double t = peak_time(ex);
  const auto g = unit_geometric_factor(ex, 1e-6, t);
  const auto b = integrate_field(ex, {1e-6, 2e-6}, t);
  CHECK(b.value == doctest::Approx(2e-6 * source_velocity(ex.vibration, t) * g.value).epsilon(1e-6));
  CHECK(integrate_field(ex, {1e-6, 2e-6}, 0.0).value == 0.0);
}

TEST_CASE("field decays with standoff") {
  Experiment ex;
  const CouplingPoint cp{1e-6, 1e-6};
  double prev = std::numeric_limits<double>::infinity();
  for (double d : {1e-6, 2e-6, 4e-6, 8e-6}) {
    const double b = std::abs(integrate_field(ex.with_standoff(d), cp, peak_time(ex)).value);
    CHECK(b < prev);
    prev = b;
  }
}

TEST_CASE("series integrates its own interpolant") {
  const std::vector<std::array<double, 2>> w{{0.0, 1.0}, {1.0, 2.0}};
  const auto s = FieldTimeSeries::sample(w, 16, [](double t) { return 3.0 * t * t; });
  CHECK(s.integral(0.0, 2.0) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(s.integral(0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.integral(0.5, 1.5) == doctest::Approx(1.5 * 1.5 * 1.5 - 0.125).epsilon(1e-12));
  CHECK(window_average(s, {1.0, 2.0}) == doctest::Approx(7.0).epsilon(1e-14));
  CHECK_THROWS_AS(s.integral(-1.0, 1.0), DomainError);
  CHECK_THROWS_AS(FieldTimeSeries::from_samples(w, 16, std::vector<double>(5)), DomainError);
}

TEST_CASE("series survives a CSV round trip") {
  const std::vector<std::array<double, 2>> w{{0.0, 7e-6}, {7e-6, 14e-6}};
  const auto s = FieldTimeSeries::sample(w, 16, [](double t) { return 1e-8 * std::sin(4.5e5 * t); });
  std::istringstream in(s.to_csv());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t_s,B_T");
  std::vector<double> ts, bs;
  while (std::getline(in, line)) {
    const auto c = line.find(',');
    ts.push_back(std::stod(line.substr(0, c)));
    bs.push_back(std::stod(line.substr(c + 1)));
  }
  const auto r = FieldTimeSeries::from_rows(w, ts, bs);
  CHECK(r.values() == s.values());
  CHECK(r.integral(0.0, 14e-6) == s.integral(0.0, 14e-6));
  ts[3] += 1e-9;
  CHECK_THROWS_AS(FieldTimeSeries::from_rows(w, ts, bs), DomainError);
}

TEST_CASE("echo series sampling validation") {
  Experiment ex;
  CHECK_THROWS_AS(field_time_series(ex, {1e-6, 1e-6}, 15), ValidationError);
  CHECK_THROWS_AS(integrate_field(ex, {-1.0, 1e-6}, 1e-6), ValidationError);
}
