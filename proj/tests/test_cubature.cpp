#include <cmath>

#include "doctest.h"
#include "nvspin/cubature.hpp"
#include "nvspin/quadrature.hpp"

using namespace nvspin;

TEST_CASE("degree-7 polynomials are integrated exactly on one cell") {
  CubatureOptions opts;
  opts.rel_tol = 1e-13;
  Box unit{{0, 0, 0}, {1, 1, 1}};
  auto f = [](const std::array<double, 3>& x) {
    return std::array<double, 3>{std::pow(x[0], 7), x[0] * x[0] * x[1] * x[1] * x[2] * x[2] * x[2],
                                 1.0 + x[0] * x[1] * x[2]};
  };
  auto r = integrate_cubature<3>(f, {unit}, opts);
  CHECK(r.value[0] == doctest::Approx(1.0 / 8.0).epsilon(1e-14));
  CHECK(r.value[1] == doctest::Approx(1.0 / 36.0).epsilon(1e-14));
  CHECK(r.value[2] == doctest::Approx(1.125).epsilon(1e-14));
}

TEST_CASE("smooth integrand over several boxes") {
  CubatureOptions opts;
  opts.rel_tol = 1e-10;
  std::vector<Box> boxes{{{0, 0, 0}, {0.5, 1, 1}}, {{0.5, 0, 0}, {1, 1, 1}}};
  auto f = [](const std::array<double, 3>& x) {
    return std::array<double, 1>{std::exp(x[0] + 2.0 * x[1] - x[2])};
  };
  auto r = integrate_cubature<1>(f, boxes, opts);
  const double exact = (std::exp(1.0) - 1.0) * (std::exp(2.0) - 1.0) / 2.0 * (1.0 - std::exp(-1.0));
  CHECK(r.converged);
  CHECK(r.value[0] == doctest::Approx(exact).epsilon(1e-9));
  CHECK(r.error[0] <= 1e-9 * exact);
}

TEST_CASE("budget exhaustion is reported") {
  CubatureOptions opts;
  opts.rel_tol = 1e-12;
  opts.max_evaluations = 2000;
  auto f = [](const std::array<double, 3>& x) {
    return std::array<double, 1>{1.0 / std::sqrt(x[0] + x[1] + x[2] + 1e-300)};
  };
  auto r = integrate_cubature<1>(f, {Box{{0, 0, 0}, {1, 1, 1}}}, opts);
  CHECK_FALSE(r.converged);
  CHECK(r.evaluations <= 2000 + 66);
}

TEST_CASE("Gauss-Legendre exactness") {
  for (std::size_t n : {1u, 4u, 16u, 64u}) {
    const auto& g = gauss_legendre(n);
    REQUIRE(g.nodes.size() == n);
    const int deg = static_cast<int>(2 * n - 1);
    for (int k = 0; k <= deg; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += g.weights[i] * std::pow(g.nodes[i], k);
      const double exact = (k % 2) ? 0.0 : 2.0 / (k + 1);
      CHECK(s == doctest::Approx(exact).epsilon(1e-13).scale(1.0));
    }
  }
}

TEST_CASE("compensated sum recovers cancelled terms") {
  CompensatedSum s;
  s.add(1.0);
  for (int i = 0; i < 1000; ++i) s.add(1e-16);
  s.add(-1.0);
  CHECK(s.value() == doctest::Approx(1e-13).epsilon(1e-10));
}
