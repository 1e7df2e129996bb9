#pragma once

// Hahn-echo readout: phase accumulated over the two echo windows, the
// populations of the two phase-cycled sequences and their sum signal.

#include <optional>
#include <string>
#include <vector>

#include "nvspin/constants.hpp"
#include "nvspin/field_engine.hpp"
#include "nvspin/geometry.hpp"

namespace nvspin {

struct EchoPhase {
  double phi = 0.0;  // rad
  double tau = 0.0;  // s
};

struct ReadoutPoint {
  double phi_mw = 0.0;
  double p_plus = 0.0;
  double p_minus = 0.0;
  double signal = 0.0;
};

/// Optional echo-decay contrast exp(-(2 tau / T2)^n) applied to the fringe.
struct Decoherence {
  bool enabled = false;
  double t2 = 77e-6;    // s
  double exponent = 3.0;

  double contrast(double tau) const;
};

// phi = gamma_e (int_0^tau B dt - int_tau^2tau B dt). The series must span [0, 2 tau].
EchoPhase echo_phase(const FieldTimeSeries& series, const SequenceTiming& timing,
                     const PhysicalConstants& k);

// Same with the second window starting at tau + delta (synchronization jitter).
// The series must cover [0, tau] and [tau + delta, 2 tau + delta].
EchoPhase echo_phase_shifted(const FieldTimeSeries& series, const SequenceTiming& timing,
                             double delta, const PhysicalConstants& k);

ReadoutPoint populations(const EchoPhase& phase, double phi_mw, const Decoherence& decay = {});

double mean_field_from_phase(const EchoPhase& phase, const PhysicalConstants& k);

struct PhaseFit {
  double phi = 0.0;
  double std_error = 0.0;
  double chi2 = 0.0;
  std::size_t dof = 0;
};

// Weighted least-squares fit of I = 1 - C sin(phi_mw) sin(phi). sigmas may be
// empty (unit weights). phi is returned in (-pi/2, pi/2].
PhaseFit fit_phase_from_fringe(const std::vector<ReadoutPoint>& points,
                               const std::vector<double>& sigmas = {}, double contrast = 1.0);

std::string readout_csv(const std::vector<ReadoutPoint>& points);

}  // namespace nvspin
