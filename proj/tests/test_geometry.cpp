#include <cmath>
#include <random>

#include "doctest.h"
#include "nvspin/errors.hpp"
#include "nvspin/geometry.hpp"

using namespace nvspin;

TEST_CASE("velocity is the time derivative of displacement") {
  VibrationState vib;
  vib.phase_origin = 0.3;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 3.0 * vib.period());
  for (int i = 0; i < 200; ++i) {
    const double t = u(rng);
    const double h = 1e-4 * vib.period();
    const double fd = (source_displacement(vib, t + h) - source_displacement(vib, t - h)) / (2.0 * h);
    CHECK(fd == doctest::Approx(source_velocity(vib, t)).epsilon(1e-6).scale(vib.max_speed()));
  }
}

TEST_CASE("peak speed of the default vibration") {
  VibrationState vib;
  CHECK(vib.max_speed() == doctest::Approx(0.0531).epsilon(5e-3));
  double peak = 0.0;
  for (int i = 0; i <= 10000; ++i)
    peak = std::max(peak, std::abs(source_velocity(vib, i * vib.period() / 10000.0)));
  CHECK(peak == doctest::Approx(vib.max_speed()).epsilon(1e-6));
}

TEST_CASE("rest geometry") {
  SourceGeometry g;
  CHECK(g.rest_center().z() == doctest::Approx(g.standoff));
  g.flat_face_down = false;
  CHECK(g.rest_center().z() == doctest::Approx(g.standoff + g.radius));
  CHECK(g.contains_local(Vec3(0, 0, -0.5 * g.radius)));
  CHECK_FALSE(g.contains_local(Vec3(0, 0, 0.5 * g.radius)));
}

TEST_CASE("closest source point sits at the standoff") {
  for (bool down : {true, false}) {
    SourceGeometry g;
    g.flat_face_down = down;
    g.standoff = 3e-6;
    FrameConvention f;
    VibrationState vib;
    vib.amplitude = 0.0;
    const Vec3 tip = down ? Vec3(0, 0, 0) : Vec3(0, 0, -g.radius);
    CHECK(displacement_to_element(g, f, vib, tip, 0.0).norm() == doctest::Approx(3e-6));
  }
}

TEST_CASE("elements outside the half-ball are rejected") {
  SourceGeometry g;
  FrameConvention f;
  VibrationState vib;
  CHECK_THROWS_AS(displacement_to_element(g, f, vib, Vec3(0, 0, -1e-6), 0.0), DomainError);
  CHECK_THROWS_AS(displacement_to_element(g, f, vib, Vec3(0, 0, 2.0 * g.radius), 0.0), DomainError);
}

TEST_CASE("invalid geometry and vibration") {
  SourceGeometry g;
  g.radius = -1.0;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g = SourceGeometry();
  g.standoff = 0.0;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  VibrationState vib;
  vib.angular_frequency = 0.0;
  CHECK_THROWS_AS(vib.validate(), ValidationError);
}

TEST_CASE("frame convention") {
  FrameConvention f;
  CHECK(f.theta() == doctest::Approx(std::asin(1.0 / std::sqrt(3.0))));
  CHECK(f.nv_axis().norm() == doctest::Approx(1.0));
  CHECK(f.cos_theta() == doctest::Approx(f.nv_axis().dot(f.vibration_axis())));
  FrameConvention g(0.4);
  CHECK(g.theta() == doctest::Approx(0.4));
  CHECK_THROWS_AS(FrameConvention(Vec3(0, 2, 0), Vec3(0, 1, 0)), ValidationError);
}

TEST_CASE("sequence synchronization") {
  VibrationState vib;
  SequenceTiming t;
  CHECK_NOTHROW(t.check_synchronized(vib));
  t.tau = 1.1 * vib.half_period();
  CHECK_THROWS_AS(t.check_synchronized(vib), ValidationError);
  t.tau = -1.0;
  CHECK_THROWS_AS(t.validate(), ValidationError);
}

TEST_CASE("half-ball volume and centroid by sampling") {
  SourceGeometry g;
  g.radius = 1.0;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 400000;
  int inside = 0;
  double zsum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    if (g.contains_local(p)) {
      ++inside;
      zsum += p.z();
    }
  }
  CHECK(8.0 * inside / n == doctest::Approx(g.volume()).epsilon(0.01));
  CHECK(zsum / inside == doctest::Approx(g.local_centroid().z()).epsilon(0.01));
}
