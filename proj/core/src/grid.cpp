#include "rsm/grid.hpp"

#include <cmath>

#include "rsm/errors.hpp"

namespace rsm {

void Grid::validate() const {
  if (!(x_min < x_max)) throw DomainError("grid needs x_min < x_max");
  if (!std::isfinite(x_min) || !std::isfinite(x_max))
    throw DomainError("grid walls must be finite");
  if (n_points < 64) throw DomainError("grid needs at least 64 points");
}

bool Grid::is_symmetric(double tol) const {
  return std::abs(x_min + x_max) <= tol * (x_max - x_min);
}

Grid Grid::symmetric(double half_width, double dx_target) {
  if (!(half_width > 0.0) || !(dx_target > 0.0))
    throw DomainError("grid construction needs positive extent and spacing");
  std::size_t n =
      static_cast<std::size_t>(std::ceil(2.0 * half_width / dx_target)) + 1;
  if (n % 2 == 0) ++n;
  if (n < 65) n = 65;
  return Grid{-half_width, half_width, n};
}

}  // namespace rsm
