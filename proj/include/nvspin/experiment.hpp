#pragma once

#include "nvspin/constants.hpp"
#include "nvspin/geometry.hpp"
#include "nvspin/quadrature.hpp"

namespace nvspin {

/// Everything the forward model needs besides the coupling itself.
struct Experiment {
  PhysicalConstants constants;
  SourceGeometry geometry;
  FrameConvention frame;
  VibrationState vibration;
  SequenceTiming timing;
  QuadratureConfig quadrature;

  void validate() const {
    constants.validate();
    geometry.validate();
    vibration.validate();
    timing.validate();
    quadrature.validate();
  }

  Experiment with_standoff(double d) const {
    Experiment e = *this;
    e.geometry.standoff = d;
    return e;
  }
};

}  // namespace nvspin
