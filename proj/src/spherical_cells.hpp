#pragma once

// Spherical-coordinate cells (radius, polar, azimuth) covering the
// half-ball, with dyadic radial shells refined toward the sphere center.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "nvspin/cubature.hpp"
#include "nvspin/geometry.hpp"

namespace nvspin::detail {

struct SphericalPoint {
  Vec3 offset;      // from the sphere center
  double jacobian;  // rho^2 sin(alpha)
};

inline SphericalPoint spherical_point(const std::array<double, 3>& s) {
  const double rho = s[0];
  const double sa = std::sin(s[1]);
  const double ca = std::cos(s[1]);
  return {Vec3(rho * sa * std::cos(s[2]), rho * sa * std::sin(s[2]), rho * ca), rho * rho * sa};
}

// Shells [R 2^-(k+1), R 2^-k] down to `scale` / 2, each split into two polar
// and four azimuthal cells.
inline std::vector<Box> half_ball_cells(const SourceGeometry& geom, double scale) {
  const double radius = geom.radius;
  const int shells =
      std::clamp(static_cast<int>(std::ceil(std::log2(radius / std::max(scale, 1e-300)))) + 1, 1, 48);
  const double a0 = geom.flat_face_down ? 0.0 : 0.5 * pi;
  const double a1 = geom.flat_face_down ? 0.5 * pi : pi;

  std::vector<double> edges{0.0};
  for (int k = shells; k >= 1; --k) edges.push_back(std::ldexp(radius, -k));
  edges.push_back(radius);

  std::vector<Box> boxes;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 4; ++b) {
        Box box;
        box.lo = {edges[i], a0 + (a1 - a0) * a / 2.0, 2.0 * pi * b / 4.0};
        box.hi = {edges[i + 1], a0 + (a1 - a0) * (a + 1) / 2.0, 2.0 * pi * (b + 1) / 4.0};
        boxes.push_back(box);
      }
    }
  }
  return boxes;
}

}  // namespace nvspin::detail
