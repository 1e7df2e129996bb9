#include <cmath>
#include <random>

#include "doctest.h"
#include "nvspin/errors.hpp"
#include "nvspin/inference.hpp"

using namespace nvspin;

namespace {

CouplingSpectrum small_spectrum() {
  CouplingSpectrum s;
  s.lambda_grid = log_grid(1e-7, 1e-5, 5);
  s.peaks = {{3e-7, 2e-7, 5e-6}, {5e-6, 3e-6, -4e-8}};
  return s;
}

}  // namespace

TEST_CASE("log grid endpoints and spacing") {
  const auto g = log_grid(1e-7, 1e-3, 5);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == doctest::Approx(1e-7));
  CHECK(g.back() == doctest::Approx(1e-3));
  CHECK(g[2] == doctest::Approx(1e-5));
  CHECK(default_lambda_grid().size() == 200);
}

TEST_CASE("spectrum is a sum of Gaussian peaks") {
  const auto s = CouplingSpectrum::reference();
  REQUIRE(s.peaks.size() == 2);
  CHECK(spectrum_eval(s, 3.82e-7) == doctest::Approx(4.83e-6).epsilon(1e-6));
  CHECK(spectrum_eval(s, 8.07e-6) == doctest::Approx(3.93e-8).epsilon(1e-6));
  const double g = 5e-8;
  CHECK(spectrum_eval(s, 3.82e-7 + g) ==
        doctest::Approx(4.83e-6 * std::exp(-0.5) + spectrum_eval({{s.peaks[1]}, {}}, 3.82e-7 + g)).epsilon(1e-9));
  CouplingSpectrum bad = s;
  bad.peaks[0].gamma_w = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("response table superposition matches direct evaluation") {
  Experiment ex;
  const auto s = small_spectrum();
  const std::vector<double> d{1e-6, 4e-6};
  const auto tab = ResponseTable::build(ex, s.lambda_grid, d);
  for (std::size_t j = 0; j < d.size(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s.lambda_grid.size(); ++i)
      sum += spectrum_eval(s, s.lambda_grid[i]) * tab.response()(j, i);
    CHECK(tab.bbar(s, j) == doctest::Approx(sum).epsilon(1e-13));
    const auto direct = model_bbar(d[j], s, ex);
    CHECK(std::abs(tab.bbar(s, j) - direct.value) <= 1e-9 * std::abs(direct.value) + 1e-20);
  }
}

TEST_CASE("unit responses are linear in the coupling") {
  const std::vector<double> lam{1e-7, 1e-6};
  const std::vector<double> d{1e-6};
  Eigen::MatrixXd r(1, 2), e = Eigen::MatrixXd::Zero(1, 2);
  r << -2e-3, -5e-4;
  const auto tab = ResponseTable::from_values(lam, d, r, e);
  CouplingSpectrum s;
  s.lambda_grid = lam;
  s.peaks = {{1e-7, 1e-9, 1e-6}};
  const double one = tab.bbar(s, 0);
  s.peaks[0].amplitude = 3e-6;
  CHECK(tab.bbar(s, 0) == doctest::Approx(3.0 * one).epsilon(1e-14));
  CHECK(one == doctest::Approx(-2e-9).epsilon(1e-12));
  CHECK_THROWS(ResponseTable::from_values(lam, d, Eigen::MatrixXd(2, 2), e));
}

TEST_CASE("velocity fit through the origin") {
  Dataset ds;
  ds.kind = DatasetKind::velocity;
  for (double v : {0.01, 0.02, 0.03, 0.04, 0.053}) ds.rows.push_back({v, -985e-9 * v, 1e-9});
  const auto fit = fit_velocity(ds);
  CHECK(fit.value("k") == doctest::Approx(-985e-9).epsilon(1e-13));
  double sxx = 0.0;
  for (const auto& r : ds.rows) sxx += r.abscissa * r.abscissa / 1e-18;
  CHECK(fit.std_error("k") == doctest::Approx(1.0 / std::sqrt(sxx)).epsilon(1e-13));
  CHECK(fit.chi2 <= 1e-20);
  CHECK(fit.dof == 4);
  for (auto& r : ds.rows) r.abscissa = 0.0;
  CHECK_THROWS_AS(fit_velocity(ds), RankError);
}

TEST_CASE("velocity fit coverage") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  int covered = 0;
  for (int n = 0; n < 2000; ++n) {
    Dataset ds;
    for (double v : {0.01, 0.02, 0.03, 0.04, 0.053}) ds.rows.push_back({v, -985e-9 * v + 1e-9 * g(rng), 1e-9});
    const auto fit = fit_velocity(ds);
    if (std::abs(fit.value("k") + 985e-9) <= fit.std_error("k")) ++covered;
  }
  CHECK(covered >= 1300);
  CHECK(covered <= 1430);
}

TEST_CASE("distance fit on a synthetic table") {
  const auto s = CouplingSpectrum::reference();
  std::vector<double> d;
  for (int i = 1; i <= 12; ++i) d.push_back(i * 1e-6);
  Eigen::MatrixXd r(12, s.lambda_grid.size());
  for (std::size_t j = 0; j < d.size(); ++j)
    for (std::size_t i = 0; i < s.lambda_grid.size(); ++i) {
      const double lam = s.lambda_grid[i];
      r(j, i) = -0.1 * lam * std::exp(-d[j] / lam) / (1.0 + lam / 1e-5);
    }
  const auto tab = ResponseTable::from_values(s.lambda_grid, d, r, Eigen::MatrixXd::Zero(12, r.cols()));
  Dataset ds;
  for (std::size_t j = 0; j < d.size(); ++j) ds.rows.push_back({d[j], tab.bbar(s, j), 1e-12});
  const auto fit = fit_distance(ds, s, tab);
  CHECK(fit.chi2 <= 1e-6);
  CHECK(fit.value("lambda_c1") == doctest::Approx(3.82e-7).epsilon(1e-3));
  CHECK(fit.value("lambda_c2") == doctest::Approx(8.07e-6).epsilon(1e-3));
  for (std::size_t i = 1; i < fit.cost_log.size(); ++i) CHECK(fit.cost_log[i] <= fit.cost_log[i - 1]);
  CHECK(fit.std_error("gamma_w1") == 0.0);
  const auto back = fitted_spectrum(s, fit);
  CHECK(back.peaks[0].lambda_c == fit.value("lambda_c1"));

  Dataset few = ds;
  few.rows.resize(4);
  CHECK_THROWS_AS(fit_distance(few, s, tab), ValidationError);
}

TEST_CASE("sensitivity scales exactly with noise") {
  const std::vector<double> lam{1e-7, 1e-6, 1e-5};
  const std::vector<double> u{-1e-4, -3e-3, 0.0};
  const auto a = sensitivity_from_responses(1e-9, lam, u);
  const auto b = sensitivity_from_responses(4e-9, lam, u);
  const auto c = sensitivity_from_responses(7e-9, lam, u);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(b.rows[i].f_perp_min == 4.0 * a.rows[i].f_perp_min);
    CHECK(c.rows[i].f_perp_min == doctest::Approx(7.0 * a.rows[i].f_perp_min).epsilon(3e-16));
  }
  CHECK(a.rows[0].f_perp_min == doctest::Approx(1e-5));
  CHECK(std::isinf(a.rows[2].f_perp_min));
  CHECK_THROWS_AS(sensitivity_from_responses(0.0, lam, u), ValidationError);
}

TEST_CASE("prior interpolation is log-log and refuses to extrapolate") {
  const std::vector<PriorPoint> prior{{1e-6, 1e-2}, {1e-4, 1e-6}};
  CHECK(*interpolate_prior(prior, 1e-5) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK_FALSE(interpolate_prior(prior, 1e-3).has_value());
  SensitivityCurve c;
  c.rows = {{1e-5, 1e-6, 0.0}, {1e-3, 1e-6, 0.0}};
  const auto rep = exclusion_compare(c, prior);
  CHECK(rep.points[0].ratio == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(rep.points[0].below_prior);
  CHECK(rep.points[1].extrapolated);
  CHECK(std::isnan(rep.points[1].ratio));
  CHECK_THROWS_AS(exclusion_compare(c, {}), ValidationError);
  CHECK_THROWS_AS(exclusion_compare(c, {{1e-4, 1.0}, {1e-6, 1.0}}), ValidationError);
}
