#include <cmath>
#include <random>

#include "doctest.h"
#include "nvspin/echo.hpp"
#include "nvspin/errors.hpp"

using namespace nvspin;

namespace {

const PhysicalConstants k;

FieldTimeSeries echo_series(const SequenceTiming& t, const std::function<double(double)>& fn) {
  return FieldTimeSeries::sample({{0.0, t.tau}, {t.tau, 2.0 * t.tau}}, 64, fn);
}

}  // namespace

TEST_CASE("static field leaves no echo phase") {
  SequenceTiming t;
  for (double b0 : {1e-9, 1e-6, 0.0476}) {
    const auto p = echo_phase(echo_series(t, [b0](double) { return b0; }), t, k);
    CHECK(std::abs(p.phi) <= 1e-12);
  }
}

TEST_CASE("synchronized sine field") {
  SequenceTiming t;
  const double w = pi / t.tau;
  const double b1 = 5e-8;
  const auto p = echo_phase(echo_series(t, [&](double s) { return b1 * std::sin(w * s); }), t, k);
  const double expected = 4.0 * k.gamma_e * b1 / w;
  CHECK(p.phi == doctest::Approx(expected).epsilon(1e-10));
  CHECK(mean_field_from_phase(p, k) == doctest::Approx(2.0 * b1 / pi).epsilon(1e-10));
}

TEST_CASE("half-period shift negates the phase") {
  SequenceTiming t;
  const double w = pi / t.tau;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
  for (int i = 0; i < 20; ++i) {
    const double ph = u(rng);
    auto f = [&](double s) { return 1e-8 * std::sin(w * s + ph) + 3e-9 * std::sin(3.0 * w * s + 2.0 * ph); };
    auto g = [&](double s) { return f(s + t.tau); };
    const double a = echo_phase(echo_series(t, f), t, k).phi;
    const double b = echo_phase(echo_series(t, g), t, k).phi;
    CHECK(b == doctest::Approx(-a).epsilon(1e-10).scale(1e-12));
  }
}

TEST_CASE("jittered echo with zero delay matches the plain echo") {
  SequenceTiming t;
  auto f = [&](double s) { return 1e-8 * std::cos(1e5 * s); };
  const auto s = echo_series(t, f);
  CHECK(echo_phase_shifted(s, t, 0.0, k).phi == doctest::Approx(echo_phase(s, t, k).phi).epsilon(1e-14));
  CHECK_THROWS_AS(echo_phase_shifted(s, t, 40e-9, k), DomainError);
}

TEST_CASE("populations sum to the fringe identity") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-pi, pi);
  for (int i = 0; i < 1000; ++i) {
    const EchoPhase p{u(rng), 7e-6};
    const double mw = u(rng);
    const auto r = populations(p, mw);
    CHECK(r.p_plus >= 0.0);
    CHECK(r.p_plus <= 1.0);
    CHECK(r.p_minus >= 0.0);
    CHECK(r.p_minus <= 1.0);
    CHECK(std::abs(r.signal - (1.0 - std::sin(mw) * std::sin(p.phi))) <= 1e-15);
  }
}

TEST_CASE("decoherence shrinks the fringe") {
  Decoherence d;
  d.enabled = true;
  const double c = d.contrast(7e-6);
  CHECK(c == doctest::Approx(std::exp(-std::pow(14e-6 / 77e-6, 3.0))).epsilon(1e-14));
  const auto r = populations({0.3, 7e-6}, 0.5 * pi, d);
  CHECK(r.signal == doctest::Approx(1.0 - c * std::sin(0.3)).epsilon(1e-14));
  CHECK(Decoherence().contrast(7e-6) == 1.0);
}

TEST_CASE("fringe fit recovers the phase") {
  std::vector<ReadoutPoint> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(populations({-0.128, 7e-6}, -pi + 2.0 * pi * (i + 0.5) / 20));
  const auto fit = fit_phase_from_fringe(pts);
  CHECK(fit.phi == doctest::Approx(-0.128).epsilon(1e-12));
  CHECK(fit.chi2 <= 1e-24);
}

TEST_CASE("fringe fit error bars cover the truth") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  const double sigma = 0.01;
  int covered = 0;
  const int trials = 1000;
  for (int n = 0; n < trials; ++n) {
    std::vector<ReadoutPoint> pts;
    for (int i = 0; i < 20; ++i) {
      auto r = populations({-0.128, 7e-6}, -pi + 2.0 * pi * (i + 0.5) / 20);
      r.signal += sigma * g(rng);
      pts.push_back(r);
    }
    const auto fit = fit_phase_from_fringe(pts, std::vector<double>(20, sigma));
    if (std::abs(fit.phi + 0.128) <= 2.0 * fit.std_error) ++covered;
  }
  CHECK(covered >= 930);
  CHECK(covered <= 975);
}

TEST_CASE("degenerate fringe designs are rejected") {
  std::vector<ReadoutPoint> pts;
  for (int i = 0; i < 4; ++i) pts.push_back(populations({0.1, 7e-6}, i * pi));
  CHECK_THROWS_AS(fit_phase_from_fringe(pts), RankError);
  pts.resize(3);
  CHECK_THROWS_AS(fit_phase_from_fringe(pts), ValidationError);
}
