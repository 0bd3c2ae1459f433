#pragma once

#include <Eigen/Dense>

#include "topogen/core/error.hpp"

namespace topogen::simp {

using ElementMatrix = Eigen::Matrix<double, 8, 8>;

// Stiffness matrix of a unit-square bilinear quadrilateral in plane stress,
// unit thickness. Local nodes run counterclockwise from the bottom-left
// corner; DOFs are (x, y) per node. Closed form of the analytic integration;
// the test suite checks it against direct Gauss quadrature.
inline ElementMatrix element_stiffness(double E, double nu) {
  if (!(E > 0.0)) throw ParameterError("element_stiffness: E must be > 0");
  if (!(nu > -1.0 && nu < 0.5)) throw ParameterError("element_stiffness: nu must be in (-1, 0.5)");

  const double k0 = 0.5 - nu / 6.0;
  const double k1 = 0.125 + nu / 8.0;
  const double k2 = -0.25 - nu / 12.0;
  const double k3 = -0.125 + 3.0 * nu / 8.0;
  const double k4 = -0.25 + nu / 12.0;
  const double k5 = -0.125 - nu / 8.0;
  const double k6 = nu / 6.0;
  const double k7 = 0.125 - 3.0 * nu / 8.0;

  ElementMatrix ke;
  ke << k0, k1, k2, k3, k4, k5, k6, k7,
        k1, k0, k7, k6, k5, k4, k3, k2,
        k2, k7, k0, k5, k6, k3, k4, k1,
        k3, k6, k5, k0, k7, k2, k1, k4,
        k4, k5, k6, k7, k0, k1, k2, k3,
        k5, k4, k3, k2, k1, k0, k7, k6,
        k6, k3, k4, k1, k2, k7, k0, k5,
        k7, k2, k1, k4, k3, k6, k5, k0;
  ke *= E / (1.0 - nu * nu);
  return ke;
}

}  // namespace topogen::simp
