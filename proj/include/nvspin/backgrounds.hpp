#pragma once

// Conventional backgrounds: induced diamagnetic field through the echo with
// imperfect synchronization, the field of a charge riding on the source, and
// the Stark-shift bound on that charge.

#include <string>

#include "nvspin/experiment.hpp"
#include "nvspin/kernels.hpp"

namespace nvspin {

struct BackgroundConfig {
  double susceptibility = -11.28e-6;
  double b0 = 476.0 * units::gauss;  // T, along the NV axis
  bool include_fork = false;
  std::vector<Prism> fork_prisms;
  double diamagnetic_rel_tol = 1e-8;
  ChargeSpec charge{5e-14, Vec3::Zero()};
  StarkBoundInput stark;

  // Reference bounds the report is compared against.
  double diamagnetic_bound = 2.3e-7 * units::nT;
  double charge_field_bound = 2.0 * units::nT;
  double stark_field_reference = 2.1e7;  // V/m
  double charge_reference = 5e-14;       // C

  void validate() const;
  DiamagneticSpec diamagnetic_spec(const FrameConvention& frame) const;
  // One prong carrying the source, directly above the half-ball.
  static std::vector<Prism> default_fork(const SourceGeometry& geom);
};

struct DiamagneticResidual {
  double static_projection = 0.0;     // T, NV-axis field at zero displacement
  double modulation = 0.0;            // T, half the NV-axis field swing over +-A
  double mean_field = 0.0;            // T, echo residual with the configured jitter
  double mean_field_synced = 0.0;     // T, echo residual without jitter
  double jitter_contribution = 0.0;   // T, mean_field - mean_field_synced
  double phase = 0.0;                 // rad, echo phase with jitter
  double error_bound = 0.0;           // T
};

// Echo residual of the NV-axis diamagnetic field: windows [0, tau] and
// [tau + jitter, 2 tau + jitter], n Gauss-Legendre nodes each.
DiamagneticResidual diamagnetic_echo_residual(const Experiment& ex, const BackgroundConfig& cfg,
                                              std::size_t nodes);

struct ChargeBackground {
  double projected_mean = 0.0;   // T, echo mean along the NV axis
  double vector_mean = 0.0;      // T, magnitude of the echo-mean field vector
  double peak = 0.0;             // T, largest field magnitude over the sequence
};

ChargeBackground charge_echo_field(const Experiment& ex, const ChargeSpec& charge, std::size_t nodes);

struct BackgroundReport {
  DiamagneticResidual diamagnetic;
  ChargeBackground charge;
  double stark_field = 0.0;  // V/m
  double charge_bound = 0.0; // C
  BackgroundConfig config;

  bool diamagnetic_within_bound() const;
  bool charge_within_bound() const;
  std::string to_json() const;
};

BackgroundReport background_report(const Experiment& ex, const BackgroundConfig& cfg, std::size_t nodes);

}  // namespace nvspin
