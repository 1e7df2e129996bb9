#include "nvspin/backgrounds.hpp"

#include <cmath>
#include <json.hpp>

#include "nvspin/cubature.hpp"
#include "nvspin/errors.hpp"
#include "nvspin/parallel.hpp"
#include "nvspin/quadrature.hpp"

namespace nvspin {

void BackgroundConfig::validate() const {
  if (!std::isfinite(susceptibility)) throw ValidationError("susceptibility must be finite");
  if (!(b0 >= 0.0)) throw ValidationError("b0 must be non-negative");
  if (!(diamagnetic_rel_tol > 0.0)) throw ValidationError("diamagnetic_rel_tol must be positive");
  for (const Prism& p : fork_prisms)
    if (!(p.edges.minCoeff() > 0.0)) throw ValidationError("fork prism edges must be positive");
  charge.validate();
  stark.validate();
}

DiamagneticSpec BackgroundConfig::diamagnetic_spec(const FrameConvention& frame) const {
  DiamagneticSpec s;
  s.susceptibility = susceptibility;
  s.b0_vector = b0 * frame.nv_axis();
  s.include_fork = include_fork;
  s.fork_prisms = fork_prisms;
  return s;
}

std::vector<Prism> BackgroundConfig::default_fork(const SourceGeometry& geom) {
  const Vec3 edges(2.36e-3, 0.59e-3, 0.33e-3);
  const double bottom = geom.standoff + geom.radius;
  return {Prism{Vec3(0.0, 0.0, bottom + 0.5 * edges.z()), edges}};
}

namespace {

struct WindowIntegral {
  double value = 0.0;
  double error = 0.0;
};

template <class F>
WindowIntegral integrate_window(F&& sample, double t0, double t1, std::size_t n, int threads) {
  const GaussLegendreRule& rule = gauss_legendre(n);
  std::vector<double> values(n), errors(n);
  const double half = 0.5 * (t1 - t0);
  const double mid = 0.5 * (t1 + t0);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto [v, e] = sample(mid + half * rule.nodes[i]);
    values[i] = v;
    errors[i] = e;
  });
  CompensatedSum sum;
  WindowIntegral out;
  for (std::size_t i = 0; i < n; ++i) {
    sum.add(half * rule.weights[i] * values[i]);
    out.error += half * rule.weights[i] * errors[i];
  }
  out.value = sum.value();
  return out;
}

}  // namespace

DiamagneticResidual diamagnetic_echo_residual(const Experiment& ex, const BackgroundConfig& cfg,
                                              std::size_t nodes) {
  cfg.validate();
  if (nodes < 2) throw ValidationError("need at least 2 nodes per window");
  const DiamagneticSpec spec = cfg.diamagnetic_spec(ex.frame);
  QuadratureConfig q = ex.quadrature;
  q.rel_tol = cfg.diamagnetic_rel_tol;
  q.abs_tol = 0.0;
  const Vec3 nv = ex.frame.nv_axis();

  auto at_offset = [&](double s) {
    const DiamagneticResult r = diamagnetic_field(spec, ex.geometry, ex.frame, Vec3::Zero(), s, q);
    return std::pair<double, double>{nv.dot(r.field), r.error_bound};
  };
  auto sample = [&](double t) { return at_offset(source_displacement(ex.vibration, t)); };

  DiamagneticResidual out;
  if (spec.susceptibility == 0.0 || cfg.b0 == 0.0) return out;
  out.static_projection = at_offset(0.0).first;
  const double a = ex.vibration.amplitude;
  out.modulation = 0.5 * (at_offset(a).first - at_offset(-a).first);

  const double tau = ex.timing.tau;
  const double delta = ex.timing.sync_jitter;
  const int threads = ex.quadrature.threads;
  const WindowIntegral first = integrate_window(sample, 0.0, tau, nodes, threads);
  const WindowIntegral second = integrate_window(sample, tau, 2.0 * tau, nodes, threads);
  const WindowIntegral shifted =
      delta == 0.0 ? second : integrate_window(sample, tau + delta, 2.0 * tau + delta, nodes, threads);

  out.mean_field = (first.value - shifted.value) / (2.0 * tau);
  out.mean_field_synced = (first.value - second.value) / (2.0 * tau);
  out.jitter_contribution = out.mean_field - out.mean_field_synced;
  out.phase = ex.constants.gamma_e * (first.value - shifted.value);
  out.error_bound = (first.error + shifted.error) / (2.0 * tau);
  return out;
}

ChargeBackground charge_echo_field(const Experiment& ex, const ChargeSpec& charge, std::size_t nodes) {
  charge.validate();
  if (nodes < 2) throw ValidationError("need at least 2 nodes per window");
  ChargeBackground out;
  if (charge.charge == 0.0) return out;
  const double tau = ex.timing.tau;
  const GaussLegendreRule& rule = gauss_legendre(nodes);
  Vec3 echo = Vec3::Zero();
  for (int w = 0; w < 2; ++w) {
    const double t0 = w * tau;
    const double sign = w == 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < nodes; ++i) {
      const double t = t0 + 0.5 * tau * (rule.nodes[i] + 1.0);
      const Vec3 pos = source_center(ex.geometry, ex.frame, ex.vibration, t) + charge.position;
      const Vec3 v = source_velocity(ex.vibration, t) * ex.frame.vibration_axis();
      const Vec3 b = moving_charge_field(charge, -pos, v, ex.constants);
      echo += sign * 0.5 * tau * rule.weights[i] * b;
      out.peak = std::max(out.peak, b.norm());
    }
  }
  echo /= 2.0 * tau;
  out.projected_mean = ex.frame.nv_axis().dot(echo);
  out.vector_mean = echo.norm();
  return out;
}

bool BackgroundReport::diamagnetic_within_bound() const {
  return std::abs(diamagnetic.mean_field) <= config.diamagnetic_bound;
}

bool BackgroundReport::charge_within_bound() const { return charge.vector_mean <= config.charge_field_bound; }

BackgroundReport background_report(const Experiment& ex, const BackgroundConfig& cfg, std::size_t nodes) {
  BackgroundReport rep;
  rep.config = cfg;
  rep.diamagnetic = diamagnetic_echo_residual(ex, cfg, nodes);
  rep.charge = charge_echo_field(ex, cfg.charge, nodes);
  rep.stark_field = stark_field(cfg.stark);
  rep.charge_bound = stark_to_charge_bound(cfg.stark, ex.constants);
  return rep;
}

std::string BackgroundReport::to_json() const {
  nlohmann::ordered_json j;
  const double margin_d =
      config.diamagnetic_bound > 0.0 ? std::abs(diamagnetic.mean_field) / config.diamagnetic_bound : 0.0;
  j["diamagnetic"] = {
      {"static_projection_T", diamagnetic.static_projection},
      {"modulation_T", diamagnetic.modulation},
      {"mean_field_T", diamagnetic.mean_field},
      {"mean_field_synced_T", diamagnetic.mean_field_synced},
      {"jitter_contribution_T", diamagnetic.jitter_contribution},
      {"phase_rad", diamagnetic.phase},
      {"error_bound_T", diamagnetic.error_bound},
      {"reference_bound_T", config.diamagnetic_bound},
      {"ratio_to_bound", margin_d},
      {"within_bound", diamagnetic_within_bound()},
      {"include_fork", config.include_fork}};
  j["moving_charge"] = {{"charge_C", config.charge.charge},
                        {"projected_mean_T", charge.projected_mean},
                        {"vector_mean_T", charge.vector_mean},
                        {"peak_T", charge.peak},
                        {"reference_bound_T", config.charge_field_bound},
                        {"within_bound", charge_within_bound()}};
  j["stark"] = {{"field_V_per_m", stark_field},
                {"field_reference_V_per_m", config.stark_field_reference},
                {"charge_bound_C", charge_bound},
                {"charge_reference_C", config.charge_reference},
                {"charge_ratio_to_reference",
                 config.charge_reference > 0.0 ? charge_bound / config.charge_reference : 0.0}};
  return j.dump(2) + "\n";
}

}  // namespace nvspin
