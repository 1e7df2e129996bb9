#include "nvspin/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nvspin/cubature.hpp"
#include "nvspin/errors.hpp"
#include "nvspin/parallel.hpp"

namespace nvspin {

void ForceRangePeak::validate() const {
  if (!(lambda_c > 0.0)) throw ValidationError("peak lambda_c must be positive");
  if (!(gamma_w > 0.0)) throw ValidationError("peak gamma_w must be positive");
  if (!std::isfinite(amplitude)) throw ValidationError("peak amplitude must be finite");
}

void CouplingSpectrum::validate() const {
  for (const ForceRangePeak& p : peaks) p.validate();
  if (lambda_grid.empty()) throw ValidationError("lambda grid is empty");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] > 0.0)) throw ValidationError("lambda grid must be positive");
    if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1]))
      throw ValidationError("lambda grid must be strictly increasing");
  }
}

CouplingSpectrum CouplingSpectrum::reference() {
  CouplingSpectrum s;
  s.peaks = {{3.82e-7, 5e-8, 4.83e-6}, {8.07e-6, 5e-8, 3.93e-8}};
  s.lambda_grid = default_lambda_grid();
  return s;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw ValidationError("invalid log grid");
  std::vector<double> g(n);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<double> default_lambda_grid() { return log_grid(1e-7, 1e-3, 200); }

namespace {

double gaussian(double lambda, double center, double width) {
  const double u = (lambda - center) / width;
  return std::exp(-0.5 * u * u);
}

}  // namespace

double spectrum_eval(const CouplingSpectrum& spec, double lambda) {
  double f = 0.0;
  for (const ForceRangePeak& p : spec.peaks) f += p.amplitude * gaussian(lambda, p.lambda_c, p.gamma_w);
  return f;
}

// --- forward model ----------------------------------------------------------

ResponseTable ResponseTable::build(const Experiment& ex, std::vector<double> lambdas,
                                   std::vector<double> distances) {
  ResponseTable t;
  t.lambdas_ = std::move(lambdas);
  t.distances_ = std::move(distances);
  const std::size_t nl = t.lambdas_.size();
  const std::size_t nd = t.distances_.size();
  t.response_.resize(static_cast<Eigen::Index>(nd), static_cast<Eigen::Index>(nl));
  t.error_.resize(static_cast<Eigen::Index>(nd), static_cast<Eigen::Index>(nl));
  parallel_for(nl * nd, ex.quadrature.threads, [&](std::size_t idx) {
    const std::size_t j = idx / nl;
    const std::size_t i = idx % nl;
    const FieldEstimate e = unit_window_mean(ex.with_standoff(t.distances_[j]), t.lambdas_[i]);
    t.response_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = e.value;
    t.error_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = e.error_bound;
  });
  return t;
}

ResponseTable ResponseTable::from_values(std::vector<double> lambdas, std::vector<double> distances,
                                         Eigen::MatrixXd response, Eigen::MatrixXd error) {
  if (response.rows() != static_cast<Eigen::Index>(distances.size()) ||
      response.cols() != static_cast<Eigen::Index>(lambdas.size()) || error.rows() != response.rows() ||
      error.cols() != response.cols())
    throw ValidationError("response table shape does not match its axes");
  ResponseTable t;
  t.lambdas_ = std::move(lambdas);
  t.distances_ = std::move(distances);
  t.response_ = std::move(response);
  t.error_ = std::move(error);
  return t;
}

double ResponseTable::bbar(const CouplingSpectrum& spec, std::size_t j) const {
  if (spec.lambda_grid != lambdas_) throw ValidationError("spectrum grid differs from the response table grid");
  CompensatedSum sum;
  for (std::size_t i = 0; i < lambdas_.size(); ++i) {
    const double f = spectrum_eval(spec, lambdas_[i]);
    if (f == 0.0) continue;
    sum.add(f * response_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
  }
  return sum.value();
}

double ResponseTable::bbar_error(const CouplingSpectrum& spec, std::size_t j) const {
  double err = 0.0;
  for (std::size_t i = 0; i < lambdas_.size(); ++i)
    err += std::abs(spectrum_eval(spec, lambdas_[i])) *
           error_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
  return err;
}

FieldEstimate model_bbar(double d, const CouplingSpectrum& spec, const Experiment& ex) {
  if (!(d > 0.0)) throw ValidationError("distance must be positive");
  spec.validate();
  const Experiment at = ex.with_standoff(d);
  const std::size_t n = spec.lambda_grid.size();
  std::vector<double> weights(n), terms(n, 0.0), errors(n, 0.0);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = spectrum_eval(spec, spec.lambda_grid[i]);
    if (weights[i] != 0.0) active.push_back(i);
  }
  std::vector<std::size_t> evals(active.size(), 0);
  parallel_for(active.size(), ex.quadrature.threads, [&](std::size_t k) {
    const std::size_t i = active[k];
    const FieldEstimate u = unit_window_mean(at, spec.lambda_grid[i]);
    terms[i] = weights[i] * u.value;
    errors[i] = std::abs(weights[i]) * u.error_bound;
    evals[k] = u.evaluations;
  });
  CompensatedSum sum;
  FieldEstimate out;
  for (std::size_t i : active) {
    sum.add(terms[i]);
    out.error_bound += errors[i];
  }
  out.value = sum.value();
  out.evaluations = std::accumulate(evals.begin(), evals.end(), std::size_t{0});
  return out;
}

namespace {

std::vector<std::size_t> active_nodes(const CouplingSpectrum& spec, std::vector<double>& weights) {
  std::vector<std::size_t> active;
  weights.assign(spec.lambda_grid.size(), 0.0);
  for (std::size_t i = 0; i < spec.lambda_grid.size(); ++i) {
    weights[i] = spectrum_eval(spec, spec.lambda_grid[i]);
    if (weights[i] != 0.0) active.push_back(i);
  }
  return active;
}

}  // namespace

namespace {

struct Samples {
  std::vector<double> values;
  std::vector<double> errors;
};

Samples spectrum_samples(const Experiment& ex, const CouplingSpectrum& spec, const std::vector<double>& times) {
  spec.validate();
  std::vector<double> weights;
  const auto active = active_nodes(spec, weights);
  const std::size_t nt = times.size();
  const std::size_t na = active.size();
  std::vector<double> terms(nt * na, 0.0), errs(nt * na, 0.0);
  parallel_for(nt * na, ex.quadrature.threads, [&](std::size_t idx) {
    const std::size_t i = active[idx % na];
    const FieldEstimate e = integrate_field(ex, CouplingPoint{spec.lambda_grid[i], 1.0}, times[idx / na]);
    terms[idx] = weights[i] * e.value;
    errs[idx] = std::abs(weights[i]) * e.error_bound;
  });
  Samples out{std::vector<double>(nt), std::vector<double>(nt, 0.0)};
  for (std::size_t k = 0; k < nt; ++k) {
    CompensatedSum sum;
    for (std::size_t a = 0; a < na; ++a) {
      sum.add(terms[k * na + a]);
      out.errors[k] += errs[k * na + a];
    }
    out.values[k] = sum.value();
  }
  return out;
}

}  // namespace

FieldEstimate spectrum_field(const Experiment& ex, const CouplingSpectrum& spec, double t) {
  const Samples s = spectrum_samples(ex, spec, {t});
  return {s.values[0], s.errors[0], 0};
}

FieldTimeSeries spectrum_time_series(const Experiment& ex, const CouplingSpectrum& spec,
                                     const std::vector<std::array<double, 2>>& windows, std::size_t n) {
  Samples s = spectrum_samples(ex, spec, FieldTimeSeries::gauss_nodes(windows, n));
  SeriesMeta meta;
  meta.geometry_hash = geometry_hash(ex);
  meta.coupling = "spectrum";
  return FieldTimeSeries::from_samples(windows, n, std::move(s.values), std::move(s.errors), meta);
}

// --- datasets ------------------------------------------------------------------

void Dataset::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const DataRow& r = rows[i];
    if (!(r.sigma > 0.0)) throw ValidationError("row " + std::to_string(i + 1) + ": sigma must be positive");
    if (!(r.abscissa > 0.0))
      throw ValidationError("row " + std::to_string(i + 1) + ": abscissa must be positive");
    if (!std::isfinite(r.bbar)) throw ValidationError("row " + std::to_string(i + 1) + ": bbar is not finite");
  }
}

std::vector<double> Dataset::abscissae() const {
  std::vector<double> x;
  for (const DataRow& r : rows) x.push_back(r.abscissa);
  return x;
}

double FitResult::value(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw DomainError("unknown fit parameter " + name);
}

double FitResult::std_error(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return std_errors[i];
  throw DomainError("unknown fit parameter " + name);
}

FitResult fit_velocity(const Dataset& data) {
  if (data.rows.size() < 2) throw ValidationError("velocity fit needs at least 2 points");
  for (const DataRow& r : data.rows)
    if (!(r.sigma > 0.0)) throw ValidationError("sigma must be positive");
  CompensatedSum sxx, sxy;
  for (const DataRow& r : data.rows) {
    const double w = 1.0 / (r.sigma * r.sigma);
    sxx.add(w * r.abscissa * r.abscissa);
    sxy.add(w * r.abscissa * r.bbar);
  }
  if (!(sxx.value() > 0.0)) throw RankError("velocity fit is rank deficient: all abscissae are zero");

  FitResult fit;
  const double k = sxy.value() / sxx.value();
  fit.names = {"k"};
  fit.values = {k};
  fit.std_errors = {1.0 / std::sqrt(sxx.value())};
  fit.covariance = Eigen::MatrixXd::Constant(1, 1, 1.0 / sxx.value());
  CompensatedSum chi2;
  for (const DataRow& r : data.rows) {
    const double res = (r.bbar - k * r.abscissa) / r.sigma;
    fit.residuals.push_back(res);
    chi2.add(res * res);
  }
  fit.chi2 = chi2.value();
  fit.dof = data.rows.size() - 1;
  fit.cost_log = {fit.chi2};
  return fit;
}

// --- distance fit ----------------------------------------------------------------

std::vector<std::string> spectrum_parameter_names(std::size_t peaks) {
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= peaks; ++k) {
    const std::string s = std::to_string(k);
    names.push_back("lambda_c" + s);
    names.push_back("amplitude" + s);
    names.push_back("gamma_w" + s);
  }
  return names;
}

namespace {

// Natural parameters per peak: (lambda_c, amplitude, gamma_w). Internally
// lambda_c and gamma_w are optimized in log space.
struct DistanceProblem {
  const ResponseTable& table;
  std::vector<std::size_t> rows;   // table row of each data point
  Eigen::VectorXd y;               // data / sigma
  Eigen::VectorXd inv_sigma;
  std::size_t peaks = 0;
  std::vector<int> free;           // indices into the 3*peaks natural vector
  double lambda_lo = 0.0, lambda_hi = 0.0;
  double amplitude_bound = 1.0;

  Eigen::MatrixXd U() const {
    Eigen::MatrixXd u(static_cast<Eigen::Index>(rows.size()), table.response().cols());
    for (std::size_t j = 0; j < rows.size(); ++j)
      u.row(static_cast<Eigen::Index>(j)) = table.response().row(static_cast<Eigen::Index>(rows[j]));
    return u;
  }

  // Weighted residuals (model - data)/sigma and the Jacobian in natural parameters.
  void evaluate(const Eigen::MatrixXd& u, const std::vector<double>& natural, Eigen::VectorXd& r,
                Eigen::MatrixXd* jac) const {
    const auto& lam = table.lambdas();
    const Eigen::Index nl = static_cast<Eigen::Index>(lam.size());
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    Eigen::VectorXd model = Eigen::VectorXd::Zero(m);
    if (jac) jac->setZero(m, static_cast<Eigen::Index>(3 * peaks));
    Eigen::VectorXd g(nl), dg_c(nl), dg_w(nl);
    for (std::size_t k = 0; k < peaks; ++k) {
      const double c = natural[3 * k], a = natural[3 * k + 1], w = natural[3 * k + 2];
      for (Eigen::Index i = 0; i < nl; ++i) {
        const double d = lam[static_cast<std::size_t>(i)] - c;
        g[i] = gaussian(lam[static_cast<std::size_t>(i)], c, w);
        dg_c[i] = g[i] * d / (w * w);
        dg_w[i] = g[i] * d * d / (w * w * w);
      }
      const Eigen::VectorXd ug = u * g;
      model += a * ug;
      if (jac) {
        jac->col(static_cast<Eigen::Index>(3 * k)) = a * (u * dg_c);
        jac->col(static_cast<Eigen::Index>(3 * k + 1)) = ug;
        jac->col(static_cast<Eigen::Index>(3 * k + 2)) = a * (u * dg_w);
      }
    }
    r = model.cwiseProduct(inv_sigma) - y;
    if (jac)
      for (Eigen::Index j = 0; j < m; ++j) jac->row(j) *= inv_sigma[j];
  }

  bool is_log(int idx) const { return idx % 3 != 1; }

  std::vector<double> to_natural(const std::vector<double>& base, const Eigen::VectorXd& x) const {
    std::vector<double> n = base;
    for (std::size_t f = 0; f < free.size(); ++f)
      n[static_cast<std::size_t>(free[f])] =
          is_log(free[f]) ? std::exp(x[static_cast<Eigen::Index>(f)]) : x[static_cast<Eigen::Index>(f)];
    return n;
  }

  Eigen::VectorXd to_internal(const std::vector<double>& natural) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(free.size()));
    for (std::size_t f = 0; f < free.size(); ++f) {
      const double v = natural[static_cast<std::size_t>(free[f])];
      x[static_cast<Eigen::Index>(f)] = is_log(free[f]) ? std::log(v) : v;
    }
    return x;
  }

  void clamp(Eigen::VectorXd& x) const {
    for (std::size_t f = 0; f < free.size(); ++f) {
      const int idx = free[f];
      double& v = x[static_cast<Eigen::Index>(f)];
      if (idx % 3 == 0)
        v = std::clamp(v, std::log(lambda_lo), std::log(lambda_hi));
      else if (idx % 3 == 1)
        v = std::clamp(v, -amplitude_bound, amplitude_bound);
      else
        v = std::clamp(v, std::log(1e-3 * lambda_lo), std::log(lambda_hi));
    }
  }

  Eigen::MatrixXd internal_jacobian(const Eigen::MatrixXd& jn, const std::vector<double>& natural) const {
    Eigen::MatrixXd j(jn.rows(), static_cast<Eigen::Index>(free.size()));
    for (std::size_t f = 0; f < free.size(); ++f) {
      const int idx = free[f];
      j.col(static_cast<Eigen::Index>(f)) =
          jn.col(idx) * (is_log(idx) ? natural[static_cast<std::size_t>(idx)] : 1.0);
    }
    return j;
  }
};

struct LmOutcome {
  std::vector<double> natural;
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_log;
};

LmOutcome levenberg_marquardt(const DistanceProblem& prob, const Eigen::MatrixXd& u,
                              std::vector<double> natural, int max_iterations) {
  LmOutcome out;
  Eigen::VectorXd x = prob.to_internal(natural);
  prob.clamp(x);
  natural = prob.to_natural(natural, x);

  Eigen::VectorXd r;
  Eigen::MatrixXd jn;
  prob.evaluate(u, natural, r, &jn);
  double cost = r.squaredNorm();
  out.cost_log.push_back(cost);
  double mu = 1e-3;

  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    const Eigen::MatrixXd j = prob.internal_jacobian(jn, natural);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd grad = j.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + cost)) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index d = 0; d < a.rows(); ++d) a(d, d) += mu * std::max(jtj(d, d), 1e-30);
      const Eigen::VectorXd step = a.ldlt().solve(-grad);
      Eigen::VectorXd trial = x + step;
      prob.clamp(trial);
      const std::vector<double> trial_nat = prob.to_natural(natural, trial);
      Eigen::VectorXd tr;
      prob.evaluate(u, trial_nat, tr, nullptr);
      const double trial_cost = tr.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double drop = cost - trial_cost;
        const double step_size = (trial - x).norm();
        x = trial;
        natural = trial_nat;
        cost = trial_cost;
        out.cost_log.push_back(cost);
        prob.evaluate(u, natural, r, &jn);
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (drop <= 1e-12 * (1.0 + cost) || step_size <= 1e-12 * (1.0 + x.norm())) out.converged = true;
        break;
      }
      mu *= 4.0;
    }
    if (!accepted) {
      // No descent direction improves the cost: a (bounded) local minimum.
      out.converged = true;
      break;
    }
    if (out.converged) break;
  }
  out.natural = natural;
  out.chi2 = cost;
  return out;
}

// Amplitudes for fixed centers and widths by weighted linear least squares.
void solve_amplitudes(const DistanceProblem& prob, const Eigen::MatrixXd& u, std::vector<double>& natural,
                      const std::set<std::string>& frozen) {
  const auto& lam = prob.table.lambdas();
  const Eigen::Index m = static_cast<Eigen::Index>(prob.rows.size());
  std::vector<std::size_t> solve_for;
  Eigen::VectorXd target = prob.y;
  std::vector<Eigen::VectorXd> cols;
  for (std::size_t k = 0; k < prob.peaks; ++k) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(lam.size()));
    for (std::size_t i = 0; i < lam.size(); ++i)
      g[static_cast<Eigen::Index>(i)] = gaussian(lam[i], natural[3 * k], natural[3 * k + 2]);
    Eigen::VectorXd col = (u * g).cwiseProduct(prob.inv_sigma);
    if (frozen.count("amplitude" + std::to_string(k + 1))) {
      target -= natural[3 * k + 1] * col;
    } else {
      solve_for.push_back(k);
      cols.push_back(col);
    }
  }
  if (solve_for.empty()) return;
  Eigen::MatrixXd a(m, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) a.col(static_cast<Eigen::Index>(c)) = cols[c];
  const Eigen::VectorXd amp = a.completeOrthogonalDecomposition().solve(target);
  for (std::size_t c = 0; c < solve_for.size(); ++c)
    natural[3 * solve_for[c] + 1] =
        std::clamp(amp[static_cast<Eigen::Index>(c)], -prob.amplitude_bound, prob.amplitude_bound);
}

std::size_t nearest_node(const std::vector<double>& grid, double lambda) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), lambda);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return grid.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  return std::log(*it / lambda) < std::log(lambda / grid[hi - 1]) ? hi : hi - 1;
}

// Best node pairs for a two-peak profile: amplitudes solved exactly for each
// pair of grid nodes used as peak centers.
std::vector<std::pair<std::size_t, std::size_t>> scan_node_pairs(const DistanceProblem& prob,
                                                                 const Eigen::MatrixXd& u,
                                                                 const std::vector<double>& widths,
                                                                 std::size_t keep) {
  const auto& lam = prob.table.lambdas();
  const std::size_t nl = lam.size();
  std::vector<std::vector<Eigen::VectorXd>> cols(2, std::vector<Eigen::VectorXd>(nl));
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t n = 0; n < nl; ++n) {
      Eigen::VectorXd g(static_cast<Eigen::Index>(nl));
      for (std::size_t i = 0; i < nl; ++i) g[static_cast<Eigen::Index>(i)] = gaussian(lam[i], lam[n], widths[k]);
      cols[k][n] = (u * g).cwiseProduct(prob.inv_sigma);
    }
  }
  struct Candidate {
    double chi2;
    std::size_t a, b;
  };
  std::vector<Candidate> best;
  const double yy = prob.y.squaredNorm();
  for (std::size_t a = 0; a < nl; ++a) {
    const Eigen::VectorXd& c1 = cols[0][a];
    const double s11 = c1.squaredNorm(), s1y = c1.dot(prob.y);
    for (std::size_t b = a + 1; b < nl; ++b) {
      const Eigen::VectorXd& c2 = cols[1][b];
      const double s22 = c2.squaredNorm(), s12 = c1.dot(c2), s2y = c2.dot(prob.y);
      const double det = s11 * s22 - s12 * s12;
      if (!(det > 1e-10 * s11 * s22)) continue;
      const double a1 = (s22 * s1y - s12 * s2y) / det;
      const double a2 = (s11 * s2y - s12 * s1y) / det;
      if (std::abs(a1) > prob.amplitude_bound || std::abs(a2) > prob.amplitude_bound) continue;
      const double chi2 = yy - a1 * s1y - a2 * s2y;
      best.push_back({chi2, a, b});
    }
  }
  std::sort(best.begin(), best.end(), [](const Candidate& x, const Candidate& y) {
    if (x.chi2 != y.chi2) return x.chi2 < y.chi2;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < std::min(keep, best.size()); ++i) out.emplace_back(best[i].a, best[i].b);
  return out;
}

}  // namespace

FitResult fit_distance(const Dataset& data, const CouplingSpectrum& init, const ResponseTable& table,
                       const DistanceFitSettings& settings) {
  data.validate();
  init.validate();
  if (data.rows.size() < 5) throw ValidationError("distance fit needs at least 5 points");
  if (init.peaks.size() != 2) throw ValidationError("distance fit expects a two-peak initial spectrum");
  if (init.lambda_grid != table.lambdas()) throw ValidationError("initial spectrum grid differs from the response table");

  const auto names = spectrum_parameter_names(init.peaks.size());
  for (const std::string& f : settings.frozen)
    if (std::find(names.begin(), names.end(), f) == names.end())
      throw ValidationError("unknown frozen parameter " + f);

  DistanceProblem prob{table, {}, {}, {}, init.peaks.size(), {}, init.lambda_grid.front(),
                       init.lambda_grid.back(), settings.amplitude_bound};
  const std::size_t m = data.rows.size();
  prob.y.resize(static_cast<Eigen::Index>(m));
  prob.inv_sigma.resize(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    const auto& dist = table.distances();
    std::size_t row = dist.size();
    for (std::size_t r = 0; r < dist.size(); ++r)
      if (std::abs(dist[r] - data.rows[j].abscissa) <= 1e-12 * dist[r]) row = r;
    if (row == dist.size()) throw ValidationError("response table lacks distance of row " + std::to_string(j + 1));
    prob.rows.push_back(row);
    prob.inv_sigma[static_cast<Eigen::Index>(j)] = 1.0 / data.rows[j].sigma;
    prob.y[static_cast<Eigen::Index>(j)] = data.rows[j].bbar / data.rows[j].sigma;
  }
  for (std::size_t i = 0; i < names.size(); ++i)
    if (!settings.frozen.count(names[i])) prob.free.push_back(static_cast<int>(i));
  if (prob.free.size() >= m) throw ValidationError("distance fit needs more points than free parameters");

  const Eigen::MatrixXd u = prob.U();
  const auto& grid = init.lambda_grid;

  std::vector<double> base;
  for (const ForceRangePeak& p : init.peaks) {
    base.push_back(p.lambda_c);
    base.push_back(p.amplitude);
    base.push_back(p.gamma_w);
  }
  const bool centers_free = !settings.frozen.count("lambda_c1") && !settings.frozen.count("lambda_c2");

  // Starts: the initial spectrum, a log-spaced lattice of center pairs and
  // the best node pairs of an exhaustive profile scan.
  std::vector<std::vector<double>> starts{base};
  if (centers_free) {
    const auto d = data.abscissae();
    const double dmin = *std::min_element(d.begin(), d.end());
    const double dmax = *std::max_element(d.begin(), d.end());
    const double split = std::clamp(std::sqrt(dmin * dmax), grid.front(), grid.back());
    const double top = std::clamp(10.0 * dmax, split, grid.back());
    const int nlat = settings.lattice_starts;
    if (nlat > 0) {
      const auto low = nlat > 1 ? log_grid(grid.front(), split, static_cast<std::size_t>(nlat))
                                : std::vector<double>{grid.front()};
      const auto high = nlat > 1 ? log_grid(split, top, static_cast<std::size_t>(nlat))
                                 : std::vector<double>{split};
      for (int k = 0; k < nlat; ++k) {
        std::vector<double> s = base;
        s[0] = grid[nearest_node(grid, low[static_cast<std::size_t>(k)])];
        s[3] = grid[nearest_node(grid, high[static_cast<std::size_t>(k)])];
        starts.push_back(s);
      }
    }
    if (settings.scan_starts > 0) {
      for (const auto& [a, b] : scan_node_pairs(prob, u, {base[2], base[5]},
                                                static_cast<std::size_t>(settings.scan_starts))) {
        std::vector<double> s = base;
        s[0] = grid[a];
        s[3] = grid[b];
        starts.push_back(s);
      }
    }
  }

  FitResult fit;
  fit.names = names;
  LmOutcome best;
  bool have_best = false;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    std::vector<double> start = starts[s];
    if (s > 0) solve_amplitudes(prob, u, start, settings.frozen);
    LmOutcome o = levenberg_marquardt(prob, u, start, settings.max_iterations);
    fit.starts.push_back({start, o.chi2, o.iterations, o.converged});
    if (o.converged && std::isfinite(o.chi2) && (!have_best || o.chi2 < best.chi2)) {
      best = o;
      have_best = true;
    }
  }
  if (!have_best) throw ConvergenceError("no distance-fit start converged", NAN, NAN);

  // Order the peaks by force range.
  std::vector<double> nat = best.natural;
  if (nat[0] > nat[3]) {
    std::swap_ranges(nat.begin(), nat.begin() + 3, nat.begin() + 3);
  }
  fit.values = nat;
  fit.chi2 = best.chi2;
  fit.cost_log = best.cost_log;
  fit.dof = m - prob.free.size();

  Eigen::VectorXd r;
  Eigen::MatrixXd jn;
  prob.evaluate(u, nat, r, &jn);
  for (Eigen::Index j = 0; j < r.size(); ++j) fit.residuals.push_back(-r[j]);

  Eigen::MatrixXd jf(jn.rows(), static_cast<Eigen::Index>(prob.free.size()));
  for (std::size_t f = 0; f < prob.free.size(); ++f) jf.col(static_cast<Eigen::Index>(f)) = jn.col(prob.free[f]);
  const Eigen::MatrixXd info = jf.transpose() * jf;
  const Eigen::MatrixXd cov_free = info.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::Index np = static_cast<Eigen::Index>(names.size());
  fit.covariance = Eigen::MatrixXd::Zero(np, np);
  for (std::size_t a = 0; a < prob.free.size(); ++a)
    for (std::size_t b = 0; b < prob.free.size(); ++b)
      fit.covariance(prob.free[a], prob.free[b]) =
          cov_free(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  for (Eigen::Index i = 0; i < np; ++i) fit.std_errors.push_back(std::sqrt(std::max(0.0, fit.covariance(i, i))));
  return fit;
}

CouplingSpectrum fitted_spectrum(const CouplingSpectrum& init, const FitResult& fit) {
  CouplingSpectrum s = init;
  for (std::size_t k = 0; k < s.peaks.size(); ++k) {
    const std::string n = std::to_string(k + 1);
    s.peaks[k].lambda_c = fit.value("lambda_c" + n);
    s.peaks[k].amplitude = fit.value("amplitude" + n);
    s.peaks[k].gamma_w = fit.value("gamma_w" + n);
  }
  return s;
}

// --- sensitivity -----------------------------------------------------------------

SensitivityCurve sensitivity_from_responses(double noise_bbar, const std::vector<double>& lambdas,
                                            const std::vector<double>& responses) {
  if (!(noise_bbar > 0.0)) throw ValidationError("noise level must be positive");
  if (lambdas.size() != responses.size()) throw ValidationError("lambda and response counts differ");
  SensitivityCurve c;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double u = std::abs(responses[i]);
    const double f = (u > 0.0 && std::isfinite(u)) ? noise_bbar / u : std::numeric_limits<double>::infinity();
    c.rows.push_back({lambdas[i], f, responses[i]});
  }
  return c;
}

SensitivityCurve sensitivity_curve(double noise_bbar, const std::vector<double>& lambdas,
                                   const Experiment& ex, double d_ref) {
  if (!(noise_bbar > 0.0)) throw ValidationError("noise level must be positive");
  const Experiment at = ex.with_standoff(d_ref);
  std::vector<double> responses(lambdas.size());
  parallel_for(lambdas.size(), ex.quadrature.threads,
               [&](std::size_t i) { responses[i] = unit_window_mean(at, lambdas[i]).value; });
  return sensitivity_from_responses(noise_bbar, lambdas, responses);
}

std::optional<double> interpolate_prior(const std::vector<PriorPoint>& prior, double lambda) {
  if (prior.empty()) return std::nullopt;
  if (lambda < prior.front().lambda || lambda > prior.back().lambda) return std::nullopt;
  if (prior.size() == 1) return prior.front().f_perp_limit;
  auto it = std::lower_bound(prior.begin(), prior.end(), lambda,
                             [](const PriorPoint& p, double l) { return p.lambda < l; });
  if (it == prior.begin()) return it->f_perp_limit;
  const PriorPoint& hi = *it;
  const PriorPoint& lo = *(it - 1);
  if (hi.lambda == lambda) return hi.f_perp_limit;
  const double t = std::log(lambda / lo.lambda) / std::log(hi.lambda / lo.lambda);
  return std::exp(std::log(lo.f_perp_limit) + t * (std::log(hi.f_perp_limit) - std::log(lo.f_perp_limit)));
}

ExclusionReport exclusion_compare(const SensitivityCurve& curve, const std::vector<PriorPoint>& prior,
                                  const CouplingSpectrum* spectrum) {
  if (prior.empty()) throw ValidationError("prior constraint table is empty");
  for (std::size_t i = 0; i < prior.size(); ++i) {
    if (!(prior[i].lambda > 0.0) || !(prior[i].f_perp_limit > 0.0))
      throw ValidationError("prior table values must be positive for log-log interpolation");
    if (i > 0 && !(prior[i].lambda > prior[i - 1].lambda))
      throw ValidationError("prior table lambdas must be strictly increasing");
  }
  ExclusionReport rep;
  for (const SensitivityRow& row : curve.rows) {
    ExclusionVerdict v;
    v.lambda = row.lambda;
    v.f_perp_min = row.f_perp_min;
    const auto lim = interpolate_prior(prior, row.lambda);
    if (!lim) {
      v.extrapolated = true;
      v.prior_limit = std::numeric_limits<double>::quiet_NaN();
      v.ratio = std::numeric_limits<double>::quiet_NaN();
    } else {
      v.prior_limit = *lim;
      v.ratio = *lim / row.f_perp_min;
      v.below_prior = row.f_perp_min < *lim;
    }
    rep.points.push_back(v);
  }
  if (spectrum) {
    std::vector<double> lam, fmin;
    for (const SensitivityRow& row : curve.rows) {
      lam.push_back(row.lambda);
      fmin.push_back(row.f_perp_min);
    }
    for (const ForceRangePeak& p : spectrum->peaks) {
      PeakVerdict v;
      v.lambda_c = p.lambda_c;
      v.amplitude = p.amplitude;
      const auto lim = interpolate_prior(prior, p.lambda_c);
      v.extrapolated = !lim.has_value();
      v.prior_limit = lim.value_or(std::numeric_limits<double>::quiet_NaN());
      v.below_prior = lim && std::abs(p.amplitude) < *lim;
      std::vector<PriorPoint> own;
      for (std::size_t i = 0; i < lam.size(); ++i)
        if (std::isfinite(fmin[i])) own.push_back({lam[i], fmin[i]});
      const auto prec = interpolate_prior(own, p.lambda_c);
      v.precision = prec.value_or(std::numeric_limits<double>::quiet_NaN());
      v.above_precision = prec && std::abs(p.amplitude) > *prec;
      rep.peaks.push_back(v);
    }
  }
  return rep;
}

}  // namespace nvspin
