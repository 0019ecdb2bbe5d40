#include "rsm/hamiltonian.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "rsm/errors.hpp"

namespace rsm {
namespace {

using C = std::complex<double>;

std::vector<C> cap_profile(const Grid& grid, const CapSpec& cap) {
  const double x_l = grid.x_min + cap.width;
  const double x_r = grid.x_max - cap.width;
  const double left_sign = cap.mode == CapMode::rzero ? +1.0 : -1.0;
  std::vector<C> out(grid.n_points, C{0.0, 0.0});
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double x = grid.x(i);
    if (x > x_r) {
      const double ramp = std::pow((x - x_r) / cap.width, cap.order);
      out[i] = C{0.0, -cap.eta * ramp};
    } else if (x < x_l) {
      const double ramp = std::pow((x_l - x) / cap.width, cap.order);
      out[i] = C{0.0, left_sign * cap.eta * ramp};
    }
  }
  return out;
}

}  // namespace

void CapSpec::validate() const {
  if (!(eta > 0.0)) throw DomainError("cap strength eta must be positive");
  if (!(width > 0.0)) throw DomainError("cap width must be positive");
  if (order < 1) throw DomainError("cap order must be >= 1");
}

OperatorMatrix::OperatorMatrix(Grid grid, std::vector<C> diag,
                               std::vector<C> off, CapSpec cap, double v_ext,
                               double l_eff)
    : grid_(grid),
      diag_(std::move(diag)),
      off_(std::move(off)),
      cap_(cap),
      v_ext_(v_ext),
      l_eff_(l_eff) {
  if (diag_.size() != grid_.n_points || off_.size() + 1 != diag_.size())
    throw DomainError("operator band sizes do not match the grid");
}

void OperatorMatrix::apply(const C* x, C* y) const {
  const std::size_t n = dim();
  for (std::size_t i = 0; i < n; ++i) {
    C acc = diag_[i] * x[i];
    if (i > 0) acc += off_[i - 1] * x[i - 1];
    if (i + 1 < n) acc += off_[i] * x[i + 1];
    y[i] = acc;
  }
}

std::vector<C> OperatorMatrix::dense() const {
  const std::size_t n = dim();
  std::vector<C> a(n * n, C{0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) {
    a[i * n + i] = diag_[i];
    if (i + 1 < n) {
      a[i * n + (i + 1)] = off_[i];
      a[(i + 1) * n + i] = off_[i];
    }
  }
  return a;
}

OperatorMatrix assemble(const PotentialSpec& spec, const Grid& grid,
                        const CapSpec& cap) {
  grid.validate();
  cap.validate();
  const Potential v(spec);
  const double l_eff = v.effective_length();
  if (!(grid.x_min < -l_eff - cap.width) || !(grid.x_max > l_eff + cap.width))
    throw DomainError("grid walls clip the absorbing ramps");

  const std::size_t n = grid.n_points;
  const double dx = grid.spacing();
  const double inv2 = 1.0 / (dx * dx);
  std::vector<C> diag(n), off(n - 1, C{-inv2, 0.0});
  const auto cap_diag = cap_profile(grid, cap);
  for (std::size_t i = 0; i < n; ++i)
    diag[i] = C{2.0 * inv2 + v(grid.x(i)), 0.0} + cap_diag[i];
  return OperatorMatrix(grid, std::move(diag), std::move(off), cap,
                        v.exterior_value(), l_eff);
}

OperatorMatrix assemble_radiating(const PotentialSpec& spec, const Grid& grid,
                                  const CapSpec& cap) {
  grid.validate();
  cap.validate();
  if (cap.mode != CapMode::rzero)
    throw DomainError("radiating assembly requires the opposite-sign cap mode");
  const Potential v(spec);
  const double l_eff = v.effective_length();
  // The ramps must start on the settled exterior: an absorber biting into
  // the window tail would damp the mode itself, not just the radiated wave.
  const double settle = v.settle_radius(1e-9);
  if (grid.x_max - cap.width < settle - 1e-9 ||
      -grid.x_min - cap.width < settle - 1e-9)
    throw DomainError("absorbing ramps would intrude inside the settle radius");

  const std::size_t n = grid.n_points;
  const double dx = grid.spacing();
  const double inv2 = 1.0 / (dx * dx);
  std::vector<C> diag(n), off(n - 1, C{-inv2, 0.0});
  const auto cap_diag = cap_profile(grid, cap);
  for (std::size_t i = 0; i < n; ++i)
    diag[i] = C{2.0 * inv2 + v(grid.x(i)), 0.0} + cap_diag[i];
  return OperatorMatrix(grid, std::move(diag), std::move(off), cap,
                        v.exterior_value(), l_eff);
}

OperatorMatrix assemble(const std::function<double(double)>& v,
                        const Grid& grid) {
  grid.validate();
  const std::size_t n = grid.n_points;
  const double dx = grid.spacing();
  const double inv2 = 1.0 / (dx * dx);
  std::vector<C> diag(n), off(n - 1, C{-inv2, 0.0});
  for (std::size_t i = 0; i < n; ++i)
    diag[i] = C{2.0 * inv2 + v(grid.x(i)), 0.0};
  CapSpec none;  // metadata only: zero-size ramps, never validated
  none.eta = 0.0;
  none.width = 0.0;
  return OperatorMatrix(grid, std::move(diag), std::move(off), none, 0.0,
                        std::numeric_limits<double>::quiet_NaN());
}

double pt_defect(const OperatorMatrix& h) {
  const Grid& g = h.grid();
  if (!g.is_symmetric(1e-12))
    throw DomainError("parity defect needs a symmetric grid");
  const auto& d = h.diagonal();
  const auto& e = h.off_diagonal();
  const std::size_t n = h.dim();
  double defect = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    defect = std::max(defect, std::abs(std::conj(d[n - 1 - i]) - d[i]));
  for (std::size_t i = 0; i + 1 < n; ++i)
    defect = std::max(defect, std::abs(std::conj(e[n - 2 - i]) - e[i]));
  return defect;
}

}  // namespace rsm
