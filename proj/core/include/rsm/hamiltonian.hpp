#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "rsm/grid.hpp"
#include "rsm/potential.hpp"

namespace rsm {

// Complex absorbing potential attached to both ends of the domain.  In
// rzero mode the left ramp has the opposite imaginary sign (gain feeding
// the incoming side, absorption on the outgoing side), which selects
// solutions carrying a right-moving wave only.  In resonance mode both
// ramps absorb.
enum class CapMode { rzero, resonance };

struct CapSpec {
  double eta = 1.0;    // ramp height at the wall
  double width = 1.0;  // ramp length measured inward from each wall
  int order = 2;
  CapMode mode = CapMode::rzero;

  void validate() const;
};

// Discretized operator -d^2/dx^2 + V + CAP with Dirichlet walls.  The
// second-difference stencil makes it symmetric tridiagonal (not Hermitian:
// the diagonal is complex), stored as the diagonal plus one off-diagonal
// band; dense() materializes it for full-spectrum solvers.
class OperatorMatrix {
 public:
  OperatorMatrix(Grid grid, std::vector<std::complex<double>> diag,
                 std::vector<std::complex<double>> off, CapSpec cap,
                 double v_ext, double l_eff);

  std::size_t dim() const { return diag_.size(); }
  const std::vector<std::complex<double>>& diagonal() const { return diag_; }
  const std::vector<std::complex<double>>& off_diagonal() const {
    return off_;
  }
  const Grid& grid() const { return grid_; }
  const CapSpec& cap() const { return cap_; }
  double exterior_value() const { return v_ext_; }
  double effective_length() const { return l_eff_; }

  // y = H x;  x and y are dim()-long and may not alias.
  void apply(const std::complex<double>* x, std::complex<double>* y) const;

  // Column-major dense copy (symmetric structure, so also row-major).
  std::vector<std::complex<double>> dense() const;

 private:
  Grid grid_;
  std::vector<std::complex<double>> diag_, off_;
  CapSpec cap_;
  double v_ext_, l_eff_;
};

// Discretize the truncated-potential problem.  The grid must enclose the
// CAP ramps strictly outside the potential's effective length.
OperatorMatrix assemble(const PotentialSpec& spec, const Grid& grid,
                        const CapSpec& cap);

// Same discretization for an arbitrary real potential, no CAP; used by
// closed-form oracles.
OperatorMatrix assemble(const std::function<double(double)>& v,
                        const Grid& grid);

// Open-channel discretization for the reflection-zero eigenproblem: the
// realized potential on its settled exterior plus opposite-sign ramps that
// impose the one-sided radiation condition -- gain on the incoming side,
// absorption on the outgoing side.  The ramps must start at or beyond the
// settle radius, so they act only on the constant-exterior channel.
OperatorMatrix assemble_radiating(const PotentialSpec& spec, const Grid& grid,
                                  const CapSpec& cap);

// Max-norm of (parity-flip + conjugate)H - H; zero iff the operator is
// PT-symmetric on the grid.  Rejects asymmetric grids.
double pt_defect(const OperatorMatrix& h);

}  // namespace rsm
