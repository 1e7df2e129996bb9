#include "nvspin/echo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "nvspin/cubature.hpp"
#include "nvspin/errors.hpp"

namespace nvspin {

double Decoherence::contrast(double tau) const {
  if (!enabled) return 1.0;
  return std::exp(-std::pow(2.0 * tau / t2, exponent));
}

namespace {

void require_span(const FieldTimeSeries& series, double t0, double t1) {
  const double slack = 1e-12 * (t1 - t0);
  if (std::abs(series.span_begin() - t0) > slack || std::abs(series.span_end() - t1) > slack)
    throw DomainError("series span does not match the echo windows");
}

}  // namespace

EchoPhase echo_phase(const FieldTimeSeries& series, const SequenceTiming& timing,
                     const PhysicalConstants& k) {
  return echo_phase_shifted(series, timing, 0.0, k);
}

EchoPhase echo_phase_shifted(const FieldTimeSeries& series, const SequenceTiming& timing,
                             double delta, const PhysicalConstants& k) {
  const double tau = timing.tau;
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  require_span(series, 0.0, 2.0 * tau + delta);
  const double first = series.integral(0.0, tau);
  const double second = series.integral(tau + delta, 2.0 * tau + delta);
  return {k.gamma_e * (first - second), tau};
}

ReadoutPoint populations(const EchoPhase& phase, double phi_mw, const Decoherence& decay) {
  const double c = decay.contrast(phase.tau);
  ReadoutPoint p;
  p.phi_mw = phi_mw;
  p.p_plus = 0.5 * (1.0 + c * std::cos(phi_mw + phase.phi));
  p.p_minus = 0.5 * (1.0 + c * std::cos(phi_mw + pi - phase.phi));
  p.signal = p.p_plus + p.p_minus;
  return p;
}

double mean_field_from_phase(const EchoPhase& phase, const PhysicalConstants& k) {
  if (!(phase.tau > 0.0)) throw DomainError("tau must be positive");
  return phase.phi / (2.0 * k.gamma_e * phase.tau);
}

PhaseFit fit_phase_from_fringe(const std::vector<ReadoutPoint>& points,
                               const std::vector<double>& sigmas, double contrast) {
  if (!sigmas.empty() && sigmas.size() != points.size())
    throw ValidationError("sigma count does not match the fringe points");
  std::set<double> distinct;
  for (const ReadoutPoint& p : points) distinct.insert(p.phi_mw);
  if (distinct.size() < 4) throw ValidationError("fringe fit needs at least 4 distinct phases");
  if (!(contrast > 0.0)) throw ValidationError("contrast must be positive");

  // 1 - I = s x with x = C sin(phi_mw), s = sin(phi).
  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = sigmas.empty() ? 1.0 : 1.0 / (sigmas[i] * sigmas[i]);
    const double x = contrast * std::sin(points[i].phi_mw);
    const double y = 1.0 - points[i].signal;
    sxx.add(w * x * x);
    sxy.add(w * x * y);
  }
  const double scale = static_cast<double>(points.size()) * contrast * contrast;
  if (!(sxx.value() > 1e-24 * scale)) throw RankError("fringe design is degenerate: sin(phi_mw) = 0 everywhere");

  const double s_hat = sxy.value() / sxx.value();
  PhaseFit fit;
  fit.dof = points.size() - 1;
  CompensatedSum chi2;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = sigmas.empty() ? 1.0 : 1.0 / (sigmas[i] * sigmas[i]);
    const double r = 1.0 - points[i].signal - s_hat * contrast * std::sin(points[i].phi_mw);
    chi2.add(w * r * r);
  }
  fit.chi2 = chi2.value();
  // Without reported sigmas the scatter sets the scale.
  const double var_s = sigmas.empty() ? fit.chi2 / static_cast<double>(fit.dof) / sxx.value()
                                      : 1.0 / sxx.value();
  const double s = std::clamp(s_hat, -1.0, 1.0);
  fit.phi = std::asin(s);
  if (fit.phi <= -0.5 * pi) fit.phi = 0.5 * pi;
  const double c = std::cos(fit.phi);
  fit.std_error = c > 0.0 ? std::sqrt(var_s) / c : std::numeric_limits<double>::infinity();
  return fit;
}

std::string readout_csv(const std::vector<ReadoutPoint>& points) {
  std::string out = "phi_mw_rad,p_plus,p_minus,signal\n";
  char buf[128];
  for (const ReadoutPoint& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.phi_mw, p.p_plus, p.p_minus,
                  p.signal);
    out += buf;
  }
  return out;
}

}  // namespace nvspin
