#include "nvspin/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nvspin/cubature.hpp"
#include "nvspin/errors.hpp"
#include "nvspin/quadrature.hpp"
#include "spherical_cells.hpp"

namespace nvspin {

void CouplingPoint::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be positive");
  if (!std::isfinite(f_perp)) throw ValidationError("f_perp must be finite");
}

void DiamagneticSpec::validate() const {
  if (!(std::abs(susceptibility) < 1e-3))
    throw ValidationError("|susceptibility| must be below 1e-3");
  for (const Prism& p : fork_prisms)
    if (!(p.edges.minCoeff() > 0.0)) throw ValidationError("fork prism edges must be positive");
}

void ChargeSpec::validate() const {
  if (!(std::abs(charge) < 1e-9)) throw ValidationError("|charge| must be below 1e-9 C");
}

void StarkBoundInput::validate() const {
  if (!(freq_shift >= 0.0)) throw ValidationError("freq_shift must be non-negative");
  if (!(dipole_moment > 0.0)) throw ValidationError("dipole_moment must be positive");
  if (!(screening_factor >= 1.0)) throw ValidationError("screening_factor must be >= 1");
  if (!(distance > 0.0)) throw ValidationError("distance must be positive");
}

double exotic_field_prefactor(const PhysicalConstants& k) {
  return k.hbar / (4.0 * pi * k.electron_mass * k.light_speed * k.gamma_e);
}

double exotic_potential(const Vec3& r, const Vec3& v, const Vec3& spin_dir, const CouplingPoint& cp,
                        const PhysicalConstants& k) {
  const double rn = r.norm();
  if (!(rn > 0.0)) throw SingularityError("exotic_potential: |r| = 0");
  const double pref = cp.f_perp * k.hbar * k.hbar / (8.0 * pi * k.electron_mass * k.light_speed);
  return pref * spin_dir.dot(v.cross(r / rn)) * yukawa_profile(rn, cp.lambda);
}

double exotic_field_point(const Vec3& r, double v_y, double theta, const CouplingPoint& cp,
                          const PhysicalConstants& k) {
  const double rn = r.norm();
  if (!(rn > 0.0)) throw SingularityError("exotic_field_point: |r| = 0");
  const double proj = (-r.x() * std::sin(theta) + r.z() * std::cos(theta)) / rn;
  return cp.f_perp * exotic_field_prefactor(k) * v_y * proj * yukawa_profile(rn, cp.lambda);
}

Vec3 diamagnetic_kernel(const Vec3& r, const Vec3& b0, double susceptibility) {
  const double r2 = r.squaredNorm();
  const double r1 = std::sqrt(r2);
  const double r3 = r2 * r1;
  const double r5 = r3 * r2;
  return susceptibility / (4.0 * pi) * (3.0 * r * b0.dot(r) / r5 - b0 / r3);
}

namespace {

bool inside_prism(const Prism& p, const Vec3& x) {
  const Vec3 d = (x - p.center).cwiseAbs();
  return d.x() <= 0.5 * p.edges.x() && d.y() <= 0.5 * p.edges.y() && d.z() <= 0.5 * p.edges.z();
}

Vec3 to_vec(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

}  // namespace

DiamagneticResult diamagnetic_field(const DiamagneticSpec& spec, const SourceGeometry& geom,
                                    const FrameConvention& frame, const Vec3& spin_pos,
                                    double source_offset, const QuadratureConfig& q) {
  spec.validate();
  DiamagneticResult out;
  const Vec3 shift = source_offset * frame.vibration_axis();
  const Vec3 center = geom.rest_center() + shift;

  if (geom.contains_local(spin_pos - center)) throw DomainError("spin lies inside the half-ball");
  if (spec.include_fork)
    for (const Prism& p : spec.fork_prisms)
      if (inside_prism(Prism{p.center + shift, p.edges}, spin_pos))
        throw DomainError("spin lies inside a fork prism");

  if (spec.susceptibility == 0.0 || spec.b0_vector.squaredNorm() == 0.0) return out;

  CubatureOptions opts;
  opts.rel_tol = q.rel_tol;
  opts.abs_tol = q.abs_tol;
  opts.max_evaluations = q.max_evaluations;
  opts.max_depth = q.subdivision_depth;

  const Vec3 rel_center = center - spin_pos;
  const double scale = std::clamp(rel_center.norm(), 1e-9 * geom.radius, geom.radius);
  const auto boxes = detail::half_ball_cells(geom, scale);
  auto ball = [&](const std::array<double, 3>& s) {
    const detail::SphericalPoint sp = detail::spherical_point(s);
    const Vec3 r = rel_center + sp.offset;
    const Vec3 b = diamagnetic_kernel(r, spec.b0_vector, spec.susceptibility) * sp.jacobian;
    return std::array<double, 3>{b.x(), b.y(), b.z()};
  };
  auto res = integrate_cubature<3>(ball, boxes, opts);
  if (!res.converged)
    throw ConvergenceError("diamagnetic half-ball integral did not converge", res.value_norm(),
                           res.error_norm());
  out.field = to_vec(res.value);
  out.error_bound = res.error_norm();

  if (spec.include_fork) {
    for (const Prism& p : spec.fork_prisms) {
      const Vec3 c = p.center + shift - spin_pos;
      Box box;
      for (int i = 0; i < 3; ++i) {
        box.lo[i] = c[i] - 0.5 * p.edges[i];
        box.hi[i] = c[i] + 0.5 * p.edges[i];
      }
      auto prism = [&](const std::array<double, 3>& x) {
        const Vec3 b = diamagnetic_kernel(to_vec(x), spec.b0_vector, spec.susceptibility);
        return std::array<double, 3>{b.x(), b.y(), b.z()};
      };
      auto pr = integrate_cubature<3>(prism, {box}, opts);
      if (!pr.converged)
        throw ConvergenceError("diamagnetic prism integral did not converge", pr.value_norm(),
                               pr.error_norm());
      out.fork_field += to_vec(pr.value);
      out.error_bound += pr.error_norm();
    }
    out.field += out.fork_field;
  }
  return out;
}

Vec3 moving_charge_field(const ChargeSpec& spec, const Vec3& r, const Vec3& v,
                         const PhysicalConstants& k) {
  const double rn = r.norm();
  if (!(rn > 0.0)) throw SingularityError("moving_charge_field: |r| = 0");
  return k.mu0 * spec.charge * v.cross(r / rn) / (4.0 * pi * rn * rn);
}

double stark_field(const StarkBoundInput& inp) { return inp.freq_shift / inp.dipole_moment; }

double stark_to_charge_bound(const StarkBoundInput& inp, const PhysicalConstants& k) {
  inp.validate();
  return 4.0 * pi * k.eps0 * inp.distance * inp.distance * inp.screening_factor * stark_field(inp);
}

}  // namespace nvspin
