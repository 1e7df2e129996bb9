#pragma once

// Point-level kernels: the velocity-dependent exotic potential and its
// effective field, plus the background kernels (induced diamagnetic
// magnetization, moving point charge, Stark-shift charge bound).
//
// Sign convention: r is the position of the electron minus the position of
// the nucleon. v is the nucleon (source) velocity.

#include <cmath>
#include <vector>

#include "nvspin/constants.hpp"
#include "nvspin/geometry.hpp"

namespace nvspin {

struct CouplingPoint {
  double lambda = 1e-6;  // m, force range hbar / (m_b c)
  double f_perp = 0.0;   // dimensionless

  void validate() const;
};

struct Prism {
  Vec3 center;  // m, lab frame at zero displacement
  Vec3 edges;   // m, full edge lengths along x, y, z
};

struct DiamagneticSpec {
  double susceptibility = -11.28e-6;
  Vec3 b0_vector = Vec3::Zero();  // T
  bool include_fork = false;
  std::vector<Prism> fork_prisms;

  void validate() const;
};

struct ChargeSpec {
  double charge = 0.0;        // C
  Vec3 position = Vec3::Zero(); // m, source-local attachment point

  void validate() const;
};

struct StarkBoundInput {
  double freq_shift = 74e3;         // Hz
  double dipole_moment = 0.35e-2;   // Hz m / V
  double screening_factor = 20.0;
  double distance = 1e-6;           // m

  void validate() const;
};

// (1/(lambda r) + 1/r^2) exp(-r/lambda)
inline double yukawa_profile(double r, double lambda) {
  return (1.0 / (lambda * r) + 1.0 / (r * r)) * std::exp(-r / lambda);
}

// hbar / (4 pi m_e c gamma_e), T m s.
double exotic_field_prefactor(const PhysicalConstants& k);

double exotic_potential(const Vec3& r, const Vec3& v, const Vec3& spin_dir,
                        const CouplingPoint& cp, const PhysicalConstants& k);

// Effective field along the NV axis from one nucleon moving along y.
double exotic_field_point(const Vec3& r, double v_y, double theta, const CouplingPoint& cp,
                          const PhysicalConstants& k);

// chi/(4 pi) [3 r (B0.r)/r^5 - B0/r^3] per unit volume.
Vec3 diamagnetic_kernel(const Vec3& r, const Vec3& b0, double susceptibility);

// Volume integral of diamagnetic_kernel over the half-ball (and the fork
// prisms when enabled). spin_pos is in the lab frame; source_offset moves
// the source along the vibration axis.
struct DiamagneticResult {
  Vec3 field = Vec3::Zero();
  double error_bound = 0.0;
  Vec3 fork_field = Vec3::Zero();
};

struct QuadratureConfig;

DiamagneticResult diamagnetic_field(const DiamagneticSpec& spec, const SourceGeometry& geom,
                                    const FrameConvention& frame, const Vec3& spin_pos,
                                    double source_offset, const QuadratureConfig& q);

// r from the charge to the field point.
Vec3 moving_charge_field(const ChargeSpec& spec, const Vec3& r, const Vec3& v,
                         const PhysicalConstants& k);

double stark_field(const StarkBoundInput& inp);
double stark_to_charge_bound(const StarkBoundInput& inp, const PhysicalConstants& k);

}  // namespace nvspin
