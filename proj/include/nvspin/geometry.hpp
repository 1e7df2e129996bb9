#pragma once

// Frames, source kinematics and sequence timing shared by every module.
//
// Lab frame: the spin sits at the origin, +z is the diamond surface normal
// pointing from the spin toward the source, +y is the vibration axis. The
// half-ball's source-local frame is parallel to the lab frame and has its
// origin at the center of the full sphere (the center of the flat face).

#include <Eigen/Dense>

#include "nvspin/constants.hpp"

namespace nvspin {

using Vec3 = Eigen::Vector3d;

struct SourceGeometry {
  double radius = 250e-6;           // m
  double nucleon_density = 1.33e30; // m^-3
  double standoff = 1e-6;           // m, spin to closest point of the source
  bool flat_face_down = true;

  void validate() const;
  double volume() const;
  // Sphere center in the lab frame when the source sits at zero displacement.
  Vec3 rest_center() const;
  // True when a source-local point lies inside the half-ball (boundary included).
  bool contains_local(const Vec3& element) const;
  // Centroid of the half-ball in source-local coordinates.
  Vec3 local_centroid() const;
};

struct VibrationState {
  double amplitude = 120e-9;                          // m
  double angular_frequency = 2.0 * pi * 70.47e3;      // rad/s
  double phase_origin = 0.0;                          // rad

  void validate() const;
  double max_speed() const { return amplitude * angular_frequency; }
  double period() const { return 2.0 * pi / angular_frequency; }
  double half_period() const { return pi / angular_frequency; }
};

/// NV axis and vibration axis. Immutable after construction; theta is fixed
/// from the stored dot product.
class FrameConvention {
 public:
  // Default: vibration along +y, NV axis in the y-z plane at theta to +y.
  FrameConvention();
  explicit FrameConvention(double theta);
  FrameConvention(const Vec3& nv_axis, const Vec3& vibration_axis);

  static double default_theta();

  const Vec3& nv_axis() const { return nv_axis_; }
  const Vec3& vibration_axis() const { return vibration_axis_; }
  double theta() const { return theta_; }
  double cos_theta() const { return cos_theta_; }

 private:
  Vec3 nv_axis_;
  Vec3 vibration_axis_;
  double theta_;
  double cos_theta_;
};

struct SequenceTiming {
  double tau = 6.994e-6;          // s, free evolution per echo window
  double pi_half_len = 102e-9;    // s
  double pi_len = 205e-9;         // s
  double laser_init_len = 2.0e-6; // s
  double laser_read_len = 0.3e-6; // s
  double sync_jitter = 40e-9;     // s

  // Relative mismatch allowed between tau and the vibration half period.
  static constexpr double sync_tolerance = 0.02;

  void validate() const;
  // Throws ValidationError when tau is not within sync_tolerance of pi/omega.
  void check_synchronized(const VibrationState& vib) const;
};

double source_velocity(const VibrationState& vib, double t);
double source_displacement(const VibrationState& vib, double t);

// Vector from the spin to a source-local volume element at time t, in the lab
// frame. Throws DomainError when the element is outside the half-ball.
Vec3 displacement_to_element(const SourceGeometry& geom, const FrameConvention& frame,
                             const VibrationState& vib, const Vec3& element, double t);

// Lab-frame sphere center at time t.
Vec3 source_center(const SourceGeometry& geom, const FrameConvention& frame,
                   const VibrationState& vib, double t);

}  // namespace nvspin
