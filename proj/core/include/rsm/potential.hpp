#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace rsm {

// Units: hbar = 1, 2m = 1, so  -y'' + V y = E y  and the free wavenumber is
// sqrt(E).  Positions are in units of the potential's natural length scale.

enum class TruncationKind { by_length, by_energy };

// Where the potential is truncated: either at a length L, or where |V|
// reaches a bound, L_eff = vmax_abs^(1/p).
struct Truncation {
  TruncationKind kind = TruncationKind::by_length;
  double value = 6.0;  // L for by_length, |V_max| for by_energy

  static Truncation by_length(double l) { return {TruncationKind::by_length, l}; }
  static Truncation by_energy(double vmax_abs) {
    return {TruncationKind::by_energy, vmax_abs};
  }
};

// What the potential is truncated to: the plateau -L_eff^p it reached, or
// zero (a sharp well).  Every output records which was used.
enum class Exterior { plateau, zero };

enum class NoiseKind { symmetric, parity_breaking };

// Random Fourier-series perturbation g(x), scaled by `strength` and confined
// to the interior by the same smoothing window as the potential itself.
//   symmetric:       g(x) = sum_i a_i cos(2 pi x / omega_i)
//   parity_breaking: g(x) = sum_i a_i sin(2 pi x / omega_i + phi_i)
struct NoiseSpec {
  NoiseKind kind = NoiseKind::symmetric;
  double strength = 0.0;  // n_R
  int num_components = 50;
  std::uint64_t seed = 0;
  double amp_min = -1.0, amp_max = 1.0;
  double freq_min = 0.1, freq_max = 5.0;
  double phase_min = 0.0, phase_max = 6.283185307179586476925287;  // [0, 2 pi)
};

enum class QuadSign { negative, positive };

// Additive quadratic term -sign * strength * x^2 inside the window; the
// plateau level shifts by -sign * strength * L_eff^2 to stay continuous.
struct QuadraticSpec {
  QuadSign sign = QuadSign::negative;
  double strength = 0.0;  // n_NQ or n_PQ
};

using Perturbation = std::variant<std::monostate, NoiseSpec, QuadraticSpec>;

struct PotentialSpec {
  double p = 4.0;
  Truncation truncation = Truncation::by_length(6.0);
  double w = 1000.0;  // sigmoid sharpness of the truncation window
  Exterior exterior = Exterior::plateau;
  Perturbation perturbation = std::monostate{};

  void validate() const;  // throws DomainError on inconsistent fields
};

// f(x,w,L) = 1/(1+e^{-w(x+L)}) + 1/(1+e^{w(x-L)}) - 1.
// ~1 inside |x| < L, ~0 outside, even in x.  Sigmoids are evaluated in
// saturating form; safe for |w*x| far beyond 1e4.
double smoothing_window(double x, double w, double l);

struct WindowDerivs {
  double f, f1, f2;
};
WindowDerivs smoothing_window_derivs(double x, double w, double l);

double effective_length(const PotentialSpec& spec);

// Realized noise draw.  Draw order is fixed per component: amplitude, then
// frequency, then (parity_breaking only) phase; equal seeds give bit-equal
// coefficient sets.
struct NoiseRealization {
  std::vector<double> amp, freq, phase;

  static NoiseRealization draw(const NoiseSpec& spec);

  double g(double x, NoiseKind kind) const;
  double g1(double x, NoiseKind kind) const;
  double g2(double x, NoiseKind kind) const;
};

// A spec bound to its realized perturbation: the object every numerical
// routine consumes.  Immutable after construction; safe to share across
// threads.
class Potential {
 public:
  explicit Potential(const PotentialSpec& spec);

  const PotentialSpec& spec() const { return spec_; }
  double p() const { return spec_.p; }
  double effective_length() const { return l_eff_; }
  double exterior_value() const { return v_ext_; }  // V at |x| -> infinity
  bool parity_symmetric() const;  // exactly even V?

  // V(x).  Rejects non-finite x.
  double operator()(double x) const;

  // Smallest radius beyond which |V(x) - exterior_value()| stays below
  // tol, i.e. where the smoothing window has effectively finished.  For
  // sharp windows this sits a few 1/w past the truncation radius.  tol is
  // floored near machine precision relative to the exterior level.
  double settle_radius(double tol) const;

  struct Derivs {
    double v1 = 0.0, v2 = 0.0;
    bool singular = false;  // set at x = 0 when p < 2 (derivative blows up)
  };
  Derivs derivatives(double x) const;

 private:
  double interior(double x) const;         // -(|x|^p + perturbation)
  void interior_derivs(double x, double& b1, double& b2, bool& singular) const;

  PotentialSpec spec_;
  double l_eff_ = 0.0;
  double v_ext_ = 0.0;
  bool even_ = true;        // evaluate on |x| so V(-x) == V(x) bitwise
  NoiseRealization noise_;  // empty unless perturbation is NoiseSpec
};

// Contract-level free functions (each constructs a Potential; prefer the
// class in loops).
double evaluate(const PotentialSpec& spec, double x);
Potential::Derivs derivatives(const PotentialSpec& spec, double x);

}  // namespace rsm
