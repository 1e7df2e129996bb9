#include "nvspin/field_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "nvspin/cubature.hpp"
#include "nvspin/errors.hpp"
#include "nvspin/parallel.hpp"
#include "spherical_cells.hpp"

namespace nvspin {

namespace {

// Geometric factor with an explicit absolute tolerance on G.
FieldEstimate geometric_factor(const Experiment& ex, double lambda, double t, double abs_tol) {
  const SourceGeometry& geom = ex.geometry;
  const Vec3 center = source_center(geom, ex.frame, ex.vibration, t);
  const double sin_t = std::sin(ex.frame.theta());
  const double cos_t = std::cos(ex.frame.theta());
  const double guard2 = 0.25 * geom.standoff * geom.standoff;
  const double scale = std::min(lambda, geom.standoff);

  auto integrand = [&](const std::array<double, 3>& s) {
    const detail::SphericalPoint sp = detail::spherical_point(s);
    // electron minus nucleon
    const Vec3 r = -(center + sp.offset);
    const double r2 = r.squaredNorm();
    if (r2 < guard2) throw DomainError("source element closer than half the standoff");
    const double rn = std::sqrt(r2);
    const double proj = (-r.x() * sin_t + r.z() * cos_t) / rn;
    return std::array<double, 1>{proj * yukawa_profile(rn, lambda) * sp.jacobian};
  };

  CubatureOptions opts;
  opts.rel_tol = ex.quadrature.rel_tol;
  const double scale_factor = geom.nucleon_density * exotic_field_prefactor(ex.constants);
  opts.abs_tol = abs_tol / scale_factor;
  opts.max_evaluations = ex.quadrature.max_evaluations;
  opts.max_depth = ex.quadrature.subdivision_depth;

  const auto res = integrate_cubature<1>(integrand, detail::half_ball_cells(geom, 0.5 * scale), opts);
  FieldEstimate out{res.value[0] * scale_factor, res.error[0] * scale_factor, res.evaluations};
  if (!res.converged) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "volume integral did not converge (lambda = %.6g m, t = %.6g s, %zu evaluations)",
                  lambda, t, res.evaluations);
    throw ConvergenceError(buf, out.value, out.error_bound);
  }
  return out;
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1) keyed by (seed, counter).
double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t bits = mix64(mix64(seed) ^ (counter * 0xD1B54A32D192ED03ULL));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace

FieldEstimate unit_geometric_factor(const Experiment& ex, double lambda, double t) {
  if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
  const double speed = std::max(ex.vibration.max_speed(), 1e-300);
  return geometric_factor(ex, lambda, t, ex.quadrature.abs_tol / speed);
}

FieldEstimate integrate_field(const Experiment& ex, const CouplingPoint& cp, double t) {
  cp.validate();
  if (!(ex.geometry.standoff > 0.0)) throw ValidationError("standoff must be positive");
  const double scale = cp.f_perp * source_velocity(ex.vibration, t);
  if (scale == 0.0) return {};
  const FieldEstimate g = geometric_factor(ex, cp.lambda, t, ex.quadrature.abs_tol / std::abs(scale));
  return {scale * g.value, std::abs(scale) * g.error_bound, g.evaluations};
}

McEstimate mc_field_oracle(const Experiment& ex, const CouplingPoint& cp, double t) {
  cp.validate();
  const QuadratureConfig& q = ex.quadrature;
  if (q.mc_samples < 10000) throw ValidationError("mc_samples must be at least 1e4");

  const SourceGeometry& geom = ex.geometry;
  const double radius = geom.radius;
  const Vec3 center = source_center(geom, ex.frame, ex.vibration, t);
  const double amplitude = cp.f_perp * source_velocity(ex.vibration, t) * geom.nucleon_density *
                           exotic_field_prefactor(ex.constants);
  const double sin_t = std::sin(ex.frame.theta());
  const double cos_t = std::cos(ex.frame.theta());

  // Sample only within rc of the spin; beyond it the Yukawa tail is bounded
  // analytically by the half-space integral 2 pi lambda (rc + 2 lambda) e^{-rc/lambda}.
  constexpr double shell_decades = 40.0;
  const double farthest = center.norm() + radius;
  double rc = geom.standoff + shell_decades * cp.lambda;
  McEstimate out;
  if (rc >= farthest) {
    rc = farthest;
  } else {
    out.truncation_bound = std::abs(amplitude) * 2.0 * pi * cp.lambda * (rc + 2.0 * cp.lambda) *
                           std::exp(-rc / cp.lambda);
  }

  Vec3 lo = center - Vec3::Constant(radius);
  Vec3 hi = center + Vec3::Constant(radius);
  if (geom.flat_face_down)
    lo.z() = center.z();
  else
    hi.z() = center.z();
  lo = lo.cwiseMax(Vec3::Constant(-rc));
  hi = hi.cwiseMin(Vec3::Constant(rc));
  const Vec3 extent = (hi - lo).cwiseMax(0.0);
  const double box_volume = extent.prod();

  const std::size_t n = q.mc_samples;
  constexpr std::size_t chunk = 1 << 15;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  struct Partial {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t accepted = 0;
  };
  std::vector<Partial> partials(chunks);
  const double rc2 = rc * rc;

  parallel_for(chunks, q.threads, [&](std::size_t c) {
    CompensatedSum s, s2;
    std::size_t acc = 0;
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const std::uint64_t base = 3 * static_cast<std::uint64_t>(i);
      const Vec3 p(lo.x() + extent.x() * counter_uniform(q.mc_seed, base),
                   lo.y() + extent.y() * counter_uniform(q.mc_seed, base + 1),
                   lo.z() + extent.z() * counter_uniform(q.mc_seed, base + 2));
      const Vec3 e = p - center;
      if (p.squaredNorm() > rc2 || !geom.contains_local(e)) {
        continue;
      }
      ++acc;
      const Vec3 r = -p;
      const double rn = r.norm();
      const double proj = (-r.x() * sin_t + r.z() * cos_t) / rn;
      const double val = box_volume * amplitude * proj * yukawa_profile(rn, cp.lambda);
      s.add(val);
      s2.add(val * val);
    }
    partials[c] = {s.value(), s2.value(), acc};
  });

  CompensatedSum total, total_sq;
  for (const Partial& p : partials) {
    total.add(p.sum);
    total_sq.add(p.sum_sq);
    out.accepted += p.accepted;
  }
  const double dn = static_cast<double>(n);
  out.mean = total.value() / dn;
  const double var = std::max(0.0, total_sq.value() / dn - out.mean * out.mean);
  out.std_error = std::sqrt(var / (dn - 1.0));
  return out;
}

// --- FieldTimeSeries -------------------------------------------------------

std::vector<double> FieldTimeSeries::gauss_nodes(const std::vector<std::array<double, 2>>& windows,
                                                 std::size_t n) {
  const GaussLegendreRule& rule = gauss_legendre(n);
  std::vector<double> t;
  t.reserve(windows.size() * n);
  for (const auto& w : windows) {
    const double mid = 0.5 * (w[0] + w[1]);
    const double half = 0.5 * (w[1] - w[0]);
    for (std::size_t i = 0; i < n; ++i) t.push_back(mid + half * rule.nodes[i]);
  }
  return t;
}

FieldTimeSeries FieldTimeSeries::from_samples(const std::vector<std::array<double, 2>>& windows,
                                              std::size_t n, std::vector<double> values,
                                              std::vector<double> errors, Meta meta) {
  if (n < 2) throw DomainError("a series window needs at least two nodes");
  if (windows.empty()) throw DomainError("a series needs at least one window");
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (!(windows[i][1] > windows[i][0])) throw DomainError("series windows must have positive length");
    if (i > 0 && windows[i][0] < windows[i - 1][1]) throw DomainError("series windows must be ascending");
  }
  if (values.size() != windows.size() * n) throw DomainError("series value count does not match nodes");
  if (errors.empty()) errors.assign(values.size(), 0.0);
  if (errors.size() != values.size()) throw DomainError("series error count does not match nodes");

  const GaussLegendreRule& rule = gauss_legendre(n);
  FieldTimeSeries s;
  s.times_ = gauss_nodes(windows, n);
  s.values_ = std::move(values);
  s.errors_ = std::move(errors);
  s.meta_ = std::move(meta);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const double half = 0.5 * (windows[k][1] - windows[k][0]);
    for (std::size_t i = 0; i < n; ++i) s.weights_.push_back(half * rule.weights[i]);
    s.windows_.push_back({windows[k][0], windows[k][1], k * n, n});
  }
  return s;
}

FieldTimeSeries FieldTimeSeries::sample(const std::vector<std::array<double, 2>>& windows,
                                        std::size_t n, const std::function<double(double)>& fn) {
  std::vector<double> v;
  for (double t : gauss_nodes(windows, n)) v.push_back(fn(t));
  return from_samples(windows, n, std::move(v));
}

FieldTimeSeries FieldTimeSeries::from_rows(const std::vector<std::array<double, 2>>& windows,
                                           const std::vector<double>& times,
                                           const std::vector<double>& values) {
  if (windows.empty() || times.size() != values.size() || times.size() % windows.size() != 0)
    throw DomainError("series rows do not split evenly into the echo windows");
  const std::size_t n = times.size() / windows.size();
  const auto expected = gauss_nodes(windows, n);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double span = windows.back()[1] - windows.front()[0];
    if (std::abs(times[i] - expected[i]) > 1e-9 * span)
      throw DomainError("series times are not the Gauss-Legendre nodes of the echo windows");
  }
  return from_samples(windows, n, values);
}

namespace {

// Integral over [a, b] inside one window of the degree n-1 interpolant.
double partial_window_integral(const std::vector<double>& times, const std::vector<double>& values,
                               const FieldTimeSeries::Window& w, double a, double b) {
  const std::size_t n = w.count;
  const double mid = 0.5 * (w.t0 + w.t1);
  const double half = 0.5 * (w.t1 - w.t0);
  std::vector<double> x(n), bw(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = (times[w.begin + j] - mid) / half;
  for (std::size_t j = 0; j < n; ++j) {
    double prod = 1.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != j) prod *= (x[j] - x[k]);
    bw[j] = 1.0 / prod;
  }
  auto interp = [&](double u) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double du = u - x[j];
      if (du == 0.0) return values[w.begin + j];
      const double c = bw[j] / du;
      num += c * values[w.begin + j];
      den += c;
    }
    return num / den;
  };
  const GaussLegendreRule& rule = gauss_legendre(n);
  const double ua = (a - mid) / half;
  const double ub = (b - mid) / half;
  CompensatedSum sum;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = 0.5 * (ua + ub) + 0.5 * (ub - ua) * rule.nodes[i];
    sum.add(rule.weights[i] * interp(u));
  }
  return sum.value() * 0.5 * (ub - ua) * half;
}

}  // namespace

double FieldTimeSeries::integral(double a, double b) const {
  if (windows_.empty()) throw DomainError("empty series");
  if (!(b >= a)) throw DomainError("integration window must have t1 >= t0");
  const double span = span_end() - span_begin();
  const double slack = 1e-12 * span;
  if (a < span_begin() - slack || b > span_end() + slack)
    throw DomainError("window lies outside the series span");

  CompensatedSum sum;
  double covered = 0.0;
  for (const Window& w : windows_) {
    const double lo = std::max(a, w.t0);
    const double hi = std::min(b, w.t1);
    if (hi <= lo) continue;
    covered += hi - lo;
    if (lo <= w.t0 + slack && hi >= w.t1 - slack) {
      for (std::size_t i = w.begin; i < w.begin + w.count; ++i) sum.add(weights_[i] * values_[i]);
    } else {
      sum.add(partial_window_integral(times_, values_, w, lo, hi));
    }
  }
  if (std::abs(covered - (b - a)) > 1e-9 * span)
    throw DomainError("window crosses a gap between series windows");
  return sum.value();
}

double FieldTimeSeries::integral_error(double a, double b) const {
  double err = 0.0;
  for (const Window& w : windows_) {
    const double lo = std::max(a, w.t0);
    const double hi = std::min(b, w.t1);
    if (hi <= lo) continue;
    const double frac = (hi - lo) / (w.t1 - w.t0);
    double e = 0.0;
    for (std::size_t i = w.begin; i < w.begin + w.count; ++i) e += weights_[i] * errors_[i];
    err += frac * e;
  }
  return err;
}

std::string FieldTimeSeries::to_csv() const {
  std::string out = "t_s,B_T\n";
  char buf[64];
  for (std::size_t i = 0; i < times_.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", times_[i], values_[i]);
    out += buf;
  }
  return out;
}

std::string FieldTimeSeries::to_json() const {
  nlohmann::ordered_json j;
  j["times_s"] = times_;
  j["B_T"] = values_;
  j["error_bound_T"] = errors_;
  nlohmann::ordered_json wins = nlohmann::ordered_json::array();
  for (const Window& w : windows_) wins.push_back({w.t0, w.t1});
  j["windows_s"] = wins;
  j["nodes_per_window"] = windows_.empty() ? 0 : windows_.front().count;
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(meta_.geometry_hash));
  j["meta"] = {{"geometry_hash", hash}, {"coupling", meta_.coupling}};
  return j.dump(2) + "\n";
}

double window_average(const FieldTimeSeries& series, std::array<double, 2> window) {
  if (!(window[1] > window[0])) throw DomainError("window must have positive length");
  return series.integral(window[0], window[1]) / (window[1] - window[0]);
}

FieldTimeSeries field_on_windows(const Experiment& ex, const CouplingPoint& cp,
                                 const std::vector<std::array<double, 2>>& windows, std::size_t n) {
  cp.validate();
  const auto times = FieldTimeSeries::gauss_nodes(windows, n);
  std::vector<double> values(times.size()), errors(times.size());
  parallel_for(times.size(), ex.quadrature.threads, [&](std::size_t i) {
    try {
      const FieldEstimate e = integrate_field(ex, cp, times[i]);
      values[i] = e.value;
      errors[i] = e.error_bound;
    } catch (const ConvergenceError& err) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " at t = %.9g s", times[i]);
      throw ConvergenceError(err.what() + std::string(buf), err.estimate(), err.error_bound());
    }
  });
  char desc[96];
  std::snprintf(desc, sizeof desc, "lambda_m=%.17g;f_perp=%.17g", cp.lambda, cp.f_perp);
  return FieldTimeSeries::from_samples(windows, n, std::move(values), std::move(errors),
                                       {geometry_hash(ex), desc});
}

FieldTimeSeries field_time_series(const Experiment& ex, const CouplingPoint& cp, std::size_t n) {
  if (n < 16 || n % 2 != 0) throw ValidationError("n_samples must be even and at least 16");
  const double tau = ex.timing.tau;
  return field_on_windows(ex, cp, {{0.0, tau}, {tau, 2.0 * tau}}, n);
}

FieldEstimate unit_window_mean(const Experiment& ex, double lambda) {
  const double tau = ex.timing.tau;
  const std::size_t n = ex.quadrature.response_nodes;
  const auto times = FieldTimeSeries::gauss_nodes({{0.0, tau}}, n);
  const GaussLegendreRule& rule = gauss_legendre(n);
  const CouplingPoint unit{lambda, 1.0};
  CompensatedSum sum;
  double err = 0.0;
  std::size_t evals = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const FieldEstimate e = integrate_field(ex, unit, times[i]);
    const double w = 0.5 * tau * rule.weights[i];
    sum.add(w * e.value);
    err += w * e.error_bound;
    evals += e.evaluations;
  }
  return {sum.value() / tau, err / tau, evals};
}

std::uint64_t geometry_hash(const Experiment& ex) {
  const double fields[] = {ex.geometry.radius,          ex.geometry.nucleon_density,
                           ex.geometry.standoff,        ex.geometry.flat_face_down ? 1.0 : 0.0,
                           ex.frame.theta(),            ex.vibration.amplitude,
                           ex.vibration.angular_frequency, ex.vibration.phase_origin,
                           ex.timing.tau};
  std::uint64_t h = 14695981039346656037ULL;
  for (double f : fields) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &f, sizeof f);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace nvspin
