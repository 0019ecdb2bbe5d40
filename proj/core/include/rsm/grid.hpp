#pragma once

#include <cstddef>

namespace rsm {

// Uniform 1-D grid for the discretized wave operator.  x_min and x_max are
// the hard walls where the wavefunction vanishes; the n_points unknowns sit
// strictly inside, so spacing = (x_max - x_min)/(n_points + 1).  With this
// convention a box potential's lowest eigenvalue converges at second order
// in the spacing.
struct Grid {
  double x_min = -1.0;
  double x_max = 1.0;
  std::size_t n_points = 64;

  double spacing() const {
    return (x_max - x_min) / static_cast<double>(n_points + 1);
  }
  // Midpoint-anchored so mirrored indices give exactly mirrored positions
  // on a symmetric grid.
  double x(std::size_t i) const {
    const double mid = 0.5 * (x_min + x_max);
    const double off = static_cast<double>(i + 1) -
                       0.5 * static_cast<double>(n_points + 1);
    return mid + off * spacing();
  }

  void validate() const;  // x_min < x_max, n_points >= 64
  // Walls mirror each other; with odd n_points the center point is x = 0.
  bool is_symmetric(double tol = 1e-12) const;

  // Symmetric grid covering [-half_width, half_width] with spacing <=
  // dx_target, n_points odd.
  static Grid symmetric(double half_width, double dx_target);
};

}  // namespace rsm
