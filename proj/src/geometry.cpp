#include "nvspin/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nvspin/errors.hpp"

namespace nvspin {

namespace {

constexpr double unit_norm_tol = 1e-12;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ValidationError(std::string(name) + " must be positive and finite");
}

void require_non_negative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v))
    throw ValidationError(std::string(name) + " must be non-negative and finite");
}

}  // namespace

void PhysicalConstants::validate() const {
  require_positive(hbar, "hbar");
  require_positive(electron_mass, "electron_mass");
  require_positive(light_speed, "light_speed");
  require_positive(gamma_e, "gamma_e");
  require_positive(mu0, "mu0");
  require_positive(eps0, "eps0");
}

void SourceGeometry::validate() const {
  require_positive(radius, "radius");
  require_positive(nucleon_density, "nucleon_density");
  require_positive(standoff, "standoff");
}

double SourceGeometry::volume() const { return 2.0 / 3.0 * pi * radius * radius * radius; }

Vec3 SourceGeometry::rest_center() const {
  return {0.0, 0.0, flat_face_down ? standoff : standoff + radius};
}

bool SourceGeometry::contains_local(const Vec3& element) const {
  const double slack = 1e-12 * radius;
  if (element.norm() > radius + slack) return false;
  return flat_face_down ? element.z() >= -slack : element.z() <= slack;
}

Vec3 SourceGeometry::local_centroid() const {
  const double zc = 3.0 * radius / 8.0;
  return {0.0, 0.0, flat_face_down ? zc : -zc};
}

void VibrationState::validate() const {
  require_non_negative(amplitude, "amplitude");
  require_positive(angular_frequency, "angular_frequency");
  if (!std::isfinite(phase_origin)) throw ValidationError("phase_origin must be finite");
}

double FrameConvention::default_theta() { return std::asin(1.0 / std::sqrt(3.0)); }

FrameConvention::FrameConvention() : FrameConvention(default_theta()) {}

FrameConvention::FrameConvention(double theta)
    : FrameConvention(Vec3(0.0, std::cos(theta), std::sin(theta)), Vec3(0.0, 1.0, 0.0)) {}

FrameConvention::FrameConvention(const Vec3& nv_axis, const Vec3& vibration_axis)
    : nv_axis_(nv_axis), vibration_axis_(vibration_axis) {
  if (std::abs(nv_axis_.norm() - 1.0) > unit_norm_tol)
    throw ValidationError("nv_axis must be unit norm");
  if (std::abs(vibration_axis_.norm() - 1.0) > unit_norm_tol)
    throw ValidationError("vibration_axis must be unit norm");
  cos_theta_ = nv_axis_.dot(vibration_axis_);
  theta_ = std::acos(std::clamp(cos_theta_, -1.0, 1.0));
}

void SequenceTiming::validate() const {
  require_positive(tau, "tau");
  require_non_negative(pi_half_len, "pi_half_len");
  require_non_negative(pi_len, "pi_len");
  require_non_negative(laser_init_len, "laser_init_len");
  require_non_negative(laser_read_len, "laser_read_len");
  require_non_negative(sync_jitter, "sync_jitter");
}

void SequenceTiming::check_synchronized(const VibrationState& vib) const {
  const double half = vib.half_period();
  if (std::abs(tau - half) > sync_tolerance * half)
    throw ValidationError("tau = " + std::to_string(tau) +
                          " s is not synchronized with the vibration half period " +
                          std::to_string(half) + " s");
}

double source_velocity(const VibrationState& vib, double t) {
  return vib.amplitude * vib.angular_frequency *
         std::sin(vib.angular_frequency * t + vib.phase_origin);
}

double source_displacement(const VibrationState& vib, double t) {
  return -vib.amplitude * std::cos(vib.angular_frequency * t + vib.phase_origin);
}

Vec3 source_center(const SourceGeometry& geom, const FrameConvention& frame,
                   const VibrationState& vib, double t) {
  return geom.rest_center() + source_displacement(vib, t) * frame.vibration_axis();
}

Vec3 displacement_to_element(const SourceGeometry& geom, const FrameConvention& frame,
                             const VibrationState& vib, const Vec3& element, double t) {
  if (!geom.contains_local(element)) throw DomainError("volume element lies outside the half-ball");
  Vec3 r = source_center(geom, frame, vib, t) + element;
  if (!(r.norm() > 0.0)) throw DomainError("volume element coincides with the spin");
  return r;
}

}  // namespace nvspin
