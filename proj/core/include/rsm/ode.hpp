#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace rsm {

// Fifth-order Dormand-Prince pair with the embedded fourth-order error
// estimate, specialized to the two-component complex systems that arise
// from second-order wave equations.

using OdeState = std::array<std::complex<double>, 2>;
using OdeRhs = std::function<OdeState(double, const OdeState&)>;

struct OdeOptions {
  double rtol = 1e-11;
  double atol = 1e-13;
  double h_init = 0.0;  // 0: derived from the interval
  double h_max = 0.0;   // 0: |interval|
  std::size_t max_steps = 80'000'000;
  // x values the stepper must land on exactly (kinks or jumps in the RHS).
  // Points outside the open interval are ignored; any order accepted.
  std::vector<double> breakpoints;
};

struct OdeResult {
  OdeState u;
  // The integrator rescales the state when it grows past ~1e150; the true
  // solution is u * exp(log_scale).  Valid because the RHS is linear.
  double log_scale = 0.0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
};

// Integrate u' = rhs(x, u) from x0 to x1 (either direction).  Throws
// NonConvergence if max_steps is exhausted or the step size underflows.
OdeResult integrate(const OdeRhs& rhs, double x0, double x1, OdeState u0,
                    const OdeOptions& opt = {});

// Same tableau, no error control: n equal steps.  Deterministic cost, used
// for cross-checks against the adaptive path.
OdeResult integrate_fixed(const OdeRhs& rhs, double x0, double x1, OdeState u0,
                          std::size_t n_steps);

}  // namespace rsm
