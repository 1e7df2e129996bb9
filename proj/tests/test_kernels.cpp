#include <cmath>
#include <random>

#include "doctest.h"
#include "nvspin/errors.hpp"
#include "nvspin/kernels.hpp"
#include "nvspin/quadrature.hpp"

using namespace nvspin;

namespace {

long double field_oracle(const Vec3& r, double v_y, double theta, const CouplingPoint& cp,
                         const PhysicalConstants& k) {
  const long double rx = r.x(), ry = r.y(), rz = r.z();
  const long double rn = std::sqrt(rx * rx + ry * ry + rz * rz);
  const long double lam = cp.lambda;
  const long double pref = static_cast<long double>(k.hbar) /
                           (4.0L * std::numbers::pi_v<long double> * k.electron_mass * k.light_speed * k.gamma_e);
  const long double proj = (-rx * std::sin((long double)theta) + rz * std::cos((long double)theta)) / rn;
  return cp.f_perp * pref * v_y * proj * (1.0L / (lam * rn) + 1.0L / (rn * rn)) * std::exp(-rn / lam);
}

}  // namespace

TEST_CASE("exotic field agrees with an extended-precision oracle") {
  PhysicalConstants k;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), lg(-7.0, -3.0);
  for (int i = 0; i < 500; ++i) {
    const Vec3 r = 1e-5 * Vec3(u(rng), u(rng), u(rng));
    CouplingPoint cp{std::pow(10.0, lg(rng)), 1e-6 * u(rng)};
    const double theta = 1.5 * u(rng);
    const double v = 0.05 * u(rng);
    const long double ref = field_oracle(r, v, theta, cp, k);
    CHECK(exotic_field_point(r, v, theta, cp, k) ==
          doctest::Approx(static_cast<double>(ref)).epsilon(1e-13).scale(0.0));
  }
}

TEST_CASE("exotic field is linear in coupling and speed") {
  PhysicalConstants k;
  const Vec3 r(1e-6, 2e-6, 3e-6);
  CouplingPoint a{1e-6, 2e-6}, b{1e-6, 6e-6};
  const double th = FrameConvention::default_theta();
  const double ba = exotic_field_point(r, 0.02, th, a, k);
  CHECK(exotic_field_point(r, 0.02, th, b, k) == doctest::Approx(3.0 * ba).epsilon(1e-14));
  CHECK(exotic_field_point(r, -0.05, th, a, k) == doctest::Approx(-2.5 * ba).epsilon(1e-14));
  CHECK(exotic_field_point(r, 0.0, th, a, k) == 0.0);
  CHECK(exotic_field_point(r, 0.02, th, CouplingPoint{1e-6, 0.0}, k) == 0.0);
}

TEST_CASE("effective field is the potential over hbar gamma / 2") {
  PhysicalConstants k;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 r = 1e-6 * Vec3(u(rng), u(rng), u(rng));
    const double th = 1.5 * u(rng);
    CouplingPoint cp{2e-6, 1e-6};
    const Vec3 spin(std::cos(th), 0.0, std::sin(th));
    const double V = exotic_potential(r, Vec3(0, 0.03, 0), spin, cp, k);
    CHECK(V / (0.5 * k.hbar * k.gamma_e) ==
          doctest::Approx(exotic_field_point(r, 0.03, th, cp, k)).epsilon(1e-12));
  }
}

TEST_CASE("exotic potential for r along z, v along y, spin along x") {
  PhysicalConstants k;
  const double lam = 1e-6, f = 1e-5, v = 0.05;
  const double pref = k.hbar * k.hbar / (8.0 * pi * k.electron_mass * k.light_speed);
  const double V = exotic_potential(Vec3(0, 0, lam), Vec3(0, v, 0), Vec3(1, 0, 0), {lam, f}, k);
  CHECK(V == doctest::Approx(f * pref * v * 2.0 / (lam * lam) * std::exp(-1.0)).epsilon(1e-13));
  const double W = exotic_potential(Vec3(0, 0, lam), Vec3(0, v, 0), Vec3(-1, 0, 0), {lam, f}, k);
  CHECK(W == doctest::Approx(-V).epsilon(1e-15));
}

TEST_CASE("coincident points are singular") {
  PhysicalConstants k;
  CHECK_THROWS_AS(exotic_potential(Vec3::Zero(), Vec3(0, 1, 0), Vec3(1, 0, 0), {}, k), SingularityError);
  CHECK_THROWS_AS(exotic_field_point(Vec3::Zero(), 1.0, 0.3, {}, k), SingularityError);
  CHECK_THROWS_AS(moving_charge_field({1e-14, Vec3::Zero()}, Vec3::Zero(), Vec3(0, 1, 0), k),
                  SingularityError);
}

TEST_CASE("Yukawa profile is positive, decreasing and tends to inverse square") {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 200; ++i) {
    const double r = 1e-8 * std::pow(1.05, i);
    const double y = yukawa_profile(r, 1e-6);
    CHECK(y > 0.0);
    CHECK(y < prev);
    prev = y;
  }
  CHECK(yukawa_profile(1e-6, 1e3) * 1e-12 == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("coupling validation") {
  CHECK_THROWS_AS((CouplingPoint{0.0, 1.0}.validate()), ValidationError);
  CHECK_THROWS_AS((CouplingPoint{1e-6, std::nan("")}.validate()), ValidationError);
  DiamagneticSpec d;
  d.susceptibility = 0.5;
  CHECK_THROWS_AS(d.validate(), ValidationError);
}

TEST_CASE("diamagnetic half-ball approaches a point dipole far away") {
  SourceGeometry g;
  FrameConvention f;
  QuadratureConfig q;
  q.rel_tol = 1e-9;
  DiamagneticSpec spec;
  spec.b0_vector = 0.0476 * f.nv_axis();
  const Vec3 centroid = g.rest_center() + g.local_centroid();
  for (const Vec3& dir : {Vec3(0, 0, -1), Vec3(1, 0, 0).normalized(), Vec3(0, 1, 1).normalized()}) {
    const Vec3 spin = centroid - 100.0 * g.radius * dir;
    const auto res = diamagnetic_field(spec, g, f, spin, 0.0, q);
    const Vec3 dipole = g.volume() * diamagnetic_kernel(spin - centroid, spec.b0_vector, spec.susceptibility);
    CHECK((res.field - dipole).norm() <= 1e-3 * dipole.norm());
  }
}

TEST_CASE("diamagnetic field is linear and vanishes without susceptibility") {
  SourceGeometry g;
  FrameConvention f;
  QuadratureConfig q;
  q.rel_tol = 1e-8;
  DiamagneticSpec a;
  a.b0_vector = 0.0476 * f.nv_axis();
  DiamagneticSpec b = a;
  b.susceptibility *= 2.0;
  const auto ra = diamagnetic_field(a, g, f, Vec3::Zero(), 0.0, q);
  const auto rb = diamagnetic_field(b, g, f, Vec3::Zero(), 0.0, q);
  CHECK((rb.field - 2.0 * ra.field).norm() <= 1e-7 * ra.field.norm());
  DiamagneticSpec z = a;
  z.susceptibility = 0.0;
  CHECK(diamagnetic_field(z, g, f, Vec3::Zero(), 0.0, q).field.norm() == 0.0);
  CHECK_THROWS_AS(diamagnetic_field(a, g, f, g.rest_center() + Vec3(0, 0, 1e-6), 0.0, q), DomainError);
}

TEST_CASE("moving charge field") {
  PhysicalConstants k;
  ChargeSpec c{5e-14, Vec3::Zero()};
  const Vec3 r(0, 0, 1e-6), v(0, 0.053, 0);
  const Vec3 b = moving_charge_field(c, r, v, k);
  CHECK(b.norm() == doctest::Approx(k.mu0 * 5e-14 * 0.053 / (4.0 * pi * 1e-12)).epsilon(1e-14));
  CHECK(b.dot(r) == doctest::Approx(0.0).scale(1e-30));
  CHECK(moving_charge_field(c, r, Vec3(0, 0, 1), k).norm() == 0.0);
}

TEST_CASE("Stark shift bound chain") {
  PhysicalConstants k;
  StarkBoundInput s;
  CHECK(stark_field(s) == doctest::Approx(74e3 / 0.35e-2).epsilon(1e-15));
  const double q = stark_to_charge_bound(s, k);
  CHECK(q == doctest::Approx(4.0 * pi * k.eps0 * 1e-12 * 20.0 * stark_field(s)).epsilon(1e-14));
  StarkBoundInput d = s;
  d.distance *= 2.0;
  CHECK(stark_to_charge_bound(d, k) == doctest::Approx(4.0 * q).epsilon(1e-14));
  s.screening_factor = 0.5;
  CHECK_THROWS_AS(stark_to_charge_bound(s, k), ValidationError);
}
