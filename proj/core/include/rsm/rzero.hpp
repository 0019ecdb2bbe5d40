#pragma once

#include <complex>
#include <string>
#include <vector>

#include "rsm/eigensolver.hpp"
#include "rsm/grid.hpp"
#include "rsm/hamiltonian.hpp"
#include "rsm/potential.hpp"

namespace rsm {

// Reflection zeros of a power-law well truncated at radius L: eigenvalues
// of the interior -|x|^p problem under the radiation condition of the
// continued potential (right-moving waves of the local wavenumber
// k(x) = sqrt(E + |x|^p) on both ends).  Truncation enters only through
// the radius; the window sharpness and exterior fields of the spec belong
// to the scattering realization and do not move these eigenvalues.
//
// A mode is accepted after passing the gates: small algebraic residual,
// insensitivity to the ramp strength, interior localization.
enum class RZeroKind { real, pair_member };
enum class Phase { unbroken, mixed, broken };

struct RZero {
  std::complex<double> energy;   // continuum-extrapolated
  double residual = 0.0;         // ||Hv - Ev|| relative to the operator scale
  double cap_sensitivity = 0.0;  // |dE| when the ramp strength doubles
  double localization = 0.0;     // |psi|^2 fraction inside |x| <= L_eff
  RZeroKind kind = RZeroKind::real;
};

struct RejectedCandidate {
  std::complex<double> energy;
  double residual = 0.0;
  double cap_sensitivity = 0.0;
  double localization = 0.0;
  std::string reason;
};

struct SpectrumOptions {
  double residual_tol = 1e-8;
  double cap_sens_tol = 1e-6;
  double localization_min = 0.5;
  double im_tol = 1e-6;    // |Im E| below this means a real mode
  double pair_tol = 1e-8;  // conjugate matching for symmetric potentials
  // Detection: dense full solve up to this dimension, otherwise a scan of
  // shifted subset solves along the real axis (plus complex offset rows).
  std::size_t dense_limit = 2100;
  // Sampling density of the detection stage (k_max * dx); refinement
  // doublings recover the accuracy a finer first grid would give.
  double detect_k_dx = 0.8;
  int shift_count = 16;
  double shift_spacing = 0.0;  // 0: derived from the exterior level spacing
  std::vector<double> shift_im_rows = {0.0, -1.5, -4.0};
  // Grid doublings used for gating and root seeding; one extra level
  // confirms the mode survives refinement and sharpens the seed by
  // Richardson extrapolation.  0 gates on the detection grid as-is.
  int refine_levels = 1;
  double overlap_min = 0.7;  // cross-grid mode identification gate
  // On (the default), accepted energies are roots of the continued
  // reflection amplitude, which carry the truncation radius exactly.  Off,
  // energies are the absorber eigenvalues themselves: grid-dependent,
  // converging to the radius-independent large-L limit — the right probe
  // for grid-order studies, wrong for radius-convergence ones.
  bool root_polish = true;
};

struct Spectrum {
  PotentialSpec spec;
  Grid grid;  // detection grid; refinement happens on doublings of it
  CapSpec cap;
  // Radius where grid detection and gating ran.  Equals the spec's
  // truncation radius when a dense solve fits there; for longer truncations
  // each accepted mode is continued from here to the target radius by
  // secant steps on the reflection root, so energies always refer to the
  // spec's radius while localization refers to this one.
  double detect_length = 0.0;
  double e_max = 0.0;
  // Trusted classification ceiling; defaults to e_max, lowered by a
  // truncation-sensitivity study (see truncation_ceiling).
  double ceiling = 0.0;
  Phase label = Phase::unbroken;
  std::vector<RZero> modes;                 // sorted by Re E
  std::vector<RejectedCandidate> rejected;  // gate failures, for diagnosis
};

// Domain and ramp policy: the absorbing ramps start where the continued
// potential has already accelerated a mid-band wave to a large local
// wavenumber (the turn-on radius extends past L for shallow wells), with
// width ~40 wavelengths-worth (clamped to [1.2, 3.0]) and a fifth-power
// profile, so the turn-on reflection is adiabatically small; the strength
// is set by quadrature so a mid-band wave accumulates ~12 nepers one-way.
// Spacing resolves the deepest local wavenumber at the walls,
// dx = k_dx / sqrt(e_max + x_wall^p + 1).
Grid default_grid(const PotentialSpec& spec, double e_max, double k_dx = 0.5);
CapSpec default_cap(const PotentialSpec& spec, double e_max);

// Detect candidate eigenvalues, refine each on doubled grids with
// Richardson extrapolation, apply the acceptance gates, pair conjugates
// (for parity-symmetric potentials) and sort by Re E.  Modes with
// |Re E| > e_max are dropped.  If nothing survives the gates, throws
// NonConvergence carrying the rejected-candidate table.
Spectrum compute_spectrum(const PotentialSpec& spec, const Grid& grid,
                          const CapSpec& cap, double e_max,
                          const SpectrumOptions& opt = {});
// Same, with default_grid/default_cap.
Spectrum compute_spectrum(const PotentialSpec& spec, double e_max,
                          const SpectrumOptions& opt = {});

// Phase of the modes with |Re E| <= e_window: unbroken when all are real,
// broken when none are, mixed otherwise.  Refuses windows above the
// spectrum's trusted ceiling, and windows containing no modes.
Phase classify(const Spectrum& s, double e_window);

// Lowest Re E at which the accepted modes of two spectra of the same family
// (differing in truncation) stop matching within rel_tol; the shared e_max
// when they agree throughout.
double truncation_ceiling(const Spectrum& a, const Spectrum& b,
                          double rel_tol = 0.05);

// Parameter point where two real modes coalesce and leave the real axis as
// a conjugate pair.
struct EpCandidate {
  double p_star = 0.0;
  double e_star = 0.0;   // energy of the (nearly) merged pair
  double min_gap = 0.0;  // smallest real-side gap observed near p_star
  double vector_overlap = 0.0;  // |<v1|v2>| there; coalescence demands ~1
  double bracket_lo = 0.0, bracket_hi = 0.0;  // final bisection bracket in p
};

struct EpSearchOptions {
  double p_tol = 5e-3;   // bisection bracket width target
  double seed_l = 0.0;   // 0: derived small length for dense seeding
  double k_dx = 0.35;    // march resolution; bisection verifies at k_dx/2
  double match_tol = 0.2;      // relative trajectory-matching gate
  double overlap_min = 0.99;   // eigenvector coalescence at acceptance
  double ambiguity_min = 0.8;  // below this, contested matches are an error
  int band_count = 8;          // modes tracked inside the band
  double im_tol = 1e-6;
};

// Track the real modes with Re E in [band_lo, band_hi] across the given
// monotone p grid (marching from the largest p down) at the truncation of
// `base`, seeding from a short-length dense solve and continuing in length
// first, then in p.  Every loss of a real pair to the complex plane is
// bisected in p and confirmed by eigenvector coalescence.  An empty result
// means no transition inside the grid.
std::vector<EpCandidate> track_and_find_ep(const PotentialSpec& base,
                                           const std::vector<double>& p_grid,
                                           double band_lo, double band_hi,
                                           const EpSearchOptions& opt = {});

struct RootOptions {
  double r_tol = 1e-10;  // |R| at acceptance
  int max_iter = 60;
  double rtol = 1e-11, atol = 1e-13;  // integrator tolerances
  double im_tol = 1e-6;
};

// Independent cross-check: secant iteration on the analytically continued
// reflection amplitude R(E), started from e_guess.  The returned mode
// carries |R| at the root as its residual; cap_sensitivity and localization
// are NaN (not measured by this route).
RZero refine_by_reflection_root(const PotentialSpec& spec,
                                std::complex<double> e_guess,
                                const RootOptions& opt = {});

}  // namespace rsm
