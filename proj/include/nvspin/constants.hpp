#pragma once

#include <numbers>

namespace nvspin {

inline constexpr double pi = std::numbers::pi;

/// SI physical constants (CODATA 2018 by default).
struct PhysicalConstants {
  double hbar = 1.054571817e-34;           // J s
  double electron_mass = 9.1093837015e-31; // kg
  double light_speed = 299792458.0;        // m/s
  double gamma_e = 1.76085963023e11;       // rad s^-1 T^-1
  double mu0 = 1.25663706212e-6;           // T m / A
  double eps0 = 8.8541878128e-12;          // F / m

  static PhysicalConstants codata() { return {}; }

  // Throws ValidationError if any constant is non-positive.
  void validate() const;
};

namespace units {
inline constexpr double nT = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double nm = 1e-9;
inline constexpr double gauss = 1e-4;
}  // namespace units

}  // namespace nvspin
