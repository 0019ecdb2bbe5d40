#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "rsm/potential.hpp"

namespace rsm {

// Transmission / reflection amplitudes for a 1-D potential that is constant
// (= v_ext) outside [-x_match, x_match], by integrating the wave equation
// across the interior and matching to plane waves exp(+-ikx), k =
// sqrt(E - v_ext).  Conventions: left incidence means psi = e^{ikx} +
// R e^{-ikx} on the left and T e^{ikx} on the right.

enum class Incidence { left, right };

struct ScatteringOptions {
  Incidence incidence = Incidence::left;
  // |V(x) - v_ext| below this defines "outside" when x_match is derived.
  double match_tol = 1e-10;
  double rtol = 1e-11;
  double atol = 1e-13;
  double match_x = 0.0;          // 0: derived from the potential tail
  double dip_resolution = 1e-4;  // dip-position target for curve refinement
};

struct ScatteringResult {
  std::complex<double> E{};
  std::complex<double> R{}, T{};
  double ratio_RT = 0.0;     // |R/T|
  double reflectance = 0.0;  // ratio^2/(1+ratio^2); equals |R|^2 when flux
                             // is conserved, and always stays in [0,1]
  double flux_error = 0.0;   // |R|^2 + |T|^2 - 1  (meaningful at real E)
  std::complex<double> k{};
  double match_x = 0.0;
  Incidence incidence = Incidence::left;
};

// Local power-law shape of a reflectance dip: reflectance ~ C |E - E_dip|^m
// fitted in log-log over the decade band [10 depth, 10^3 depth].
struct DipCharacterization {
  double E_dip = 0.0;
  double depth = 0.0;
  double exponent = 0.0;
  double window_lo = 0.0, window_hi = 0.0;  // |E - E_dip| range used
  double fit_residual = 0.0;                // rms in log-log coordinates
  int points_used = 0;
};

// Potential given directly as a callable; the oracle-friendly entry point.
// breakpoints lists interior x where v jumps or kinks, so integration steps
// land on them exactly.
struct ScatterProblem {
  std::function<double(double)> v;
  double v_ext = 0.0;
  double x_match = 0.0;
  std::vector<double> breakpoints;
};

ScatteringResult scatter(const ScatterProblem& prob, std::complex<double> E,
                         const ScatteringOptions& opt = {});

ScatteringResult scatter(const Potential& v, std::complex<double> E,
                         const ScatteringOptions& opt = {});

// The left-incidence reflection amplitude of the realized potential,
// analytically continued in E.  The amplitude is computed exactly as in
// scatter() — transmitted wave launched beyond the settle radius, plane-wave
// decomposition on the incidence side — so its zeros coincide with the
// vanishing of the measurable reflection, and |r| equals the axis |R| at
// real E; only the phase reference plane (settle radius vs. origin)
// differs.  Conjugation symmetry of the real potential folds Im E < 0 onto
// the stable integration direction.  `contrast` is the accumulated branch
// growth across the span in nepers; runaway spans throw NonConvergence.
struct ContinuedReflection {
  std::complex<double> r{};
  double contrast = 0.0;
};

ContinuedReflection continued_reflection(const Potential& v,
                                         std::complex<double> E,
                                         double rtol = 1e-11,
                                         double atol = 1e-13);

// Pointwise reflectance over an energy grid; the matching point is derived
// once and shared.  Energies at or below v_ext are rejected.
std::vector<ScatteringResult> scatter_curve(const Potential& v,
                                            const std::vector<double>& energies,
                                            const ScatteringOptions& opt = {});

// scatter_curve plus adaptive refinement around every interior local
// minimum, until each dip position is bracketed to dip_resolution; the
// refinement samples (a geometric ladder into each dip) are merged into the
// returned curve, which stays sorted by Re E.
std::vector<ScatteringResult> reflectance_curve(
    const Potential& v, const std::vector<double>& energies,
    const ScatteringOptions& opt = {});

// Fit the dip nearest e_dip_guess on an already-refined curve.  Throws
// NonConvergence (reporting the floor) when too few samples sit inside the
// decade band, i.e. the dip is not resolved above the sampling floor.
DipCharacterization characterize_dip(const std::vector<ScatteringResult>& curve,
                                     double e_dip_guess);

// Smallest X with |V(x) - v_ext| < tol for both signs of x from there out.
double matching_point(const Potential& v, double tol);

}  // namespace rsm
