#include "rsm/rzero.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <variant>

#include "rsm/errors.hpp"
#include "rsm/scattering.hpp"

namespace rsm {
namespace {

using C = std::complex<double>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double operator_scale(const OperatorMatrix& h) {
  double d = 0.0, o = 0.0;
  for (const C& v : h.diagonal()) d = std::max(d, std::abs(v));
  for (const C& v : h.off_diagonal()) o = std::max(o, std::abs(v));
  return d + 2.0 * o;
}

double localization_of(const OperatorMatrix& h, const std::vector<C>& v) {
  const Grid& g = h.grid();
  const double l = h.effective_length();
  double in = 0.0, tot = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double w = std::norm(v[i]);
    tot += w;
    if (std::abs(g.x(i)) <= l) in += w;
  }
  return tot > 0.0 ? in / tot : 0.0;
}

double overlap(const std::vector<C>& a, const std::vector<C>& b) {
  C s{};
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += std::conj(a[i]) * b[i];
    na += std::norm(a[i]);
    nb += std::norm(b[i]);
  }
  const double d = std::sqrt(na * nb);
  return d > 0.0 ? std::abs(s) / d : 0.0;
}

Grid doubled(const Grid& g) { return Grid{g.x_min, g.x_max, 2 * g.n_points + 1}; }

// Iterative subset solves can stall when the outermost requested mode sits
// in a near-degenerate cluster; a smaller block around the same shift
// usually converges where the larger one did not.
std::vector<EigenPair> subset_with_retry(const OperatorMatrix& h, C shift,
                                         std::initializer_list<int> counts) {
  std::string last = "subset solve: empty retry ladder";
  for (int c : counts) {
    try {
      return eig_subset_near(h, shift, c);
    } catch (const NonConvergence& e) {
      last = e.what();
    }
  }
  throw NonConvergence(last);
}

// One known mode re-found on another operator: ask for the single nearest
// pair first (inverse iteration is immune to starvation of the farther
// directions then), widen only if the identity check is unhappy.
struct PickError {
  std::string why;
};
std::variant<EigenPair, PickError> pick_by_overlap(const OperatorMatrix& h,
                                                   C shift,
                                                   const std::vector<C>& ref,
                                                   double min_overlap) {
  std::string last;
  double best_seen = -1.0;
  for (int c : {1, 4}) {
    std::vector<EigenPair> pairs;
    try {
      pairs = eig_subset_near(h, shift, c);
    } catch (const NonConvergence& e) {
      last = e.what();
      continue;
    }
    double best = -1.0;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double ov = overlap(ref, pairs[i].vector);
      if (ov > best) {
        best = ov;
        pick = i;
      }
    }
    if (best >= min_overlap) return pairs[pick];
    best_seen = std::max(best_seen, best);
  }
  std::ostringstream os;
  if (best_seen >= 0.0)
    os << "mode not re-identified (best vector overlap " << best_seen << ")";
  else
    os << "subset solve stalled: " << last;
  return PickError{os.str()};
}

// Prolongation onto the doubled grid: old points are kept (they interleave
// exactly), new ones take neighbor averages with zero walls.
std::vector<C> prolong(const std::vector<C>& c) {
  const std::size_t n = c.size();
  std::vector<C> f(2 * n + 1);
  for (std::size_t i = 0; i < n; ++i) f[2 * i + 1] = c[i];
  f[0] = 0.5 * c[0];
  for (std::size_t j = 1; j < n; ++j) f[2 * j] = 0.5 * (c[j - 1] + c[j]);
  f[2 * n] = 0.5 * c[n - 1];
  return f;
}

// --- Radiating-ramp geometry ---------------------------------------------
//
// The continued potential accelerates everything that leaves the well, so
// the radiation condition can be imposed at any radius at or beyond the
// truncation.  Starting the ramps where the local wavenumber k_on is
// already large makes their turn-on adiabatic: with an order-5 ramp and
// k_on * width ~ 40, the turn-on reflection sits near 1e-7 while the ramp
// stays a few points thick on the detection grid.

struct RampGeometry {
  double start = 0.0;  // turn-on radius (>= truncation radius)
  double width = 0.0;
  double half = 0.0;  // wall position: start + width
};

RampGeometry ramp_geometry(double l, double p, double e_max) {
  const double e_ref = 1.0 + 0.5 * e_max;  // mid-band reference energy
  double start = l;
  if (e_ref + std::pow(l, p) < 178.0)  // k_on floor ~ 13.3
    start = std::pow(178.0 - e_ref, 1.0 / p);
  const double k_on = std::sqrt(e_ref + std::pow(start, p));
  RampGeometry g;
  g.start = start;
  g.width = std::clamp(40.0 / k_on, 1.2, 3.0);
  g.half = g.start + g.width;
  return g;
}

// Dense detection wants the whole operator in front of the QR solver.
// n grows monotonically with the truncation radius, so the longest radius
// that still fits the dense budget is a bisection.
double grid_points_for(const PotentialSpec& spec, double e_max, double l,
                       double k_dx) {
  const RampGeometry rg = ramp_geometry(l, spec.p, e_max);
  const double k_wall = std::sqrt(e_max + std::pow(rg.half, spec.p) + 1.0);
  return 2.0 * rg.half * k_wall / k_dx;
}

double dense_feasible_length(const PotentialSpec& spec, double e_max,
                             const SpectrumOptions& opt) {
  const double l_target = effective_length(spec);
  const double budget = static_cast<double>(opt.dense_limit) - 2.0;
  if (grid_points_for(spec, e_max, l_target, opt.detect_k_dx) <= budget)
    return l_target;
  double lo = 0.5, hi = l_target;
  if (grid_points_for(spec, e_max, lo, opt.detect_k_dx) > budget)
    throw DomainError(
        "dense detection cannot fit the dimension budget even at a minimal "
        "radius; raise dense_limit or detect_k_dx");
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (grid_points_for(spec, e_max, mid, opt.detect_k_dx) <= budget ? lo : hi) =
        mid;
  }
  // The detection well must already be deep enough that every mode below
  // e_max exists there; otherwise continuation in length cannot supply a
  // complete spectrum and honesty demands a refusal.
  if (std::pow(lo, spec.p) < 40.0 * e_max)
    throw DomainError(
        "detection radius feasible for the dense budget is too shallow for "
        "this energy window; raise dense_limit or lower e_max");
  return lo;
}

struct Candidate {
  C energy;
  std::vector<C> vec;
  double localization = 0.0;
  double residual = 0.0;  // raw algebraic residual on the detection grid
};

struct RefineOutcome {
  bool ok = false;
  std::string fail;
  C energy{};
  double residual = 0.0;
  double localization = 0.0;
  double cap_sensitivity = 0.0;
};

// Secant iteration on the continued reflection amplitude.  With
// floor_tol, acceptance loosens to the amplitude-contrast noise floor, so
// marginal high-contrast energies stop at their precision wall instead of
// burning the budget; the achieved |R| is always reported as-is.
struct SecantResult {
  C energy{};
  double residual = 0.0;
};

SecantResult secant_on_reflection(const Potential& v, C e_guess,
                                  const RootOptions& opt, bool floor_tol) {
  auto refl = [&](C e) {
    return continued_reflection(v, e, opt.rtol, opt.atol);
  };
  C e0 = e_guess;
  C e1 = e_guess + (1.0 + std::abs(e_guess)) * C{1e-7, 3e-8};
  ContinuedReflection r0 = refl(e0), r1 = refl(e1);
  for (int it = 0; it < opt.max_iter; ++it) {
    const double tol =
        floor_tol
            ? std::max(opt.r_tol, 50.0 * 2.2e-16 * std::exp(r1.contrast))
            : opt.r_tol;
    if (std::abs(r1.r) < tol) return {e1, std::abs(r1.r)};
    const C dr = r1.r - r0.r;
    if (std::abs(dr) == 0.0)
      throw NonConvergence("secant step degenerate: R(E) stationary");
    const C e2 = e1 - r1.r * (e1 - e0) / dr;
    if (std::abs(e2 - e1) > 5.0 * (1.0 + std::abs(e1)))
      throw NonConvergence("root search diverged away from the seed");
    e0 = e1;
    r0 = r1;
    e1 = e2;
    try {
      r1 = refl(e1);
    } catch (const DomainError& err) {
      // Mid-iteration wandering into the channel branch point is a failure
      // to converge, not a caller error.
      throw NonConvergence(std::string("root search left the trustworthy "
                                       "region: ") +
                           err.what());
    }
  }
  throw NonConvergence("reflection-root search exhausted its budget");
}

// The absorber eigenproblem is the detector: it finds modes, proves them
// localized and insensitive to the ramp strength, and supplies seeds.  The
// reported energy comes from a secant solve on the continued reflection
// amplitude, which carries the truncation radius exactly; absorber
// eigenvalues converge to the radius-independent large-L limit instead and
// stand in only where the sideways integration overflows (strongly complex
// E at large radii, where the two conventions agree far below tolerance).
RefineOutcome refine_candidate(const PotentialSpec& spec, const CapSpec& cap,
                               const Grid& g0, const Candidate& cand,
                               const SpectrumOptions& opt) {
  RefineOutcome out;
  const int levels = std::max(0, opt.refine_levels);

  std::vector<C> es{cand.energy};
  Grid g = g0;
  std::vector<C> vec = cand.vec;
  OperatorMatrix h_fine = assemble_radiating(spec, g0, cap);
  double residual_fine = cand.residual;
  for (int lvl = 1; lvl <= levels; ++lvl) {
    g = doubled(g);
    h_fine = assemble_radiating(spec, g, cap);
    // The previous level's eigenvalue is the shift: the mode moves only by
    // its residual grid bias, far less than its distance to neighbors.
    auto picked =
        pick_by_overlap(h_fine, es.back(), prolong(vec), opt.overlap_min);
    if (const auto* err = std::get_if<PickError>(&picked)) {
      out.fail = "lost across grid refinement: " + err->why;
      return out;
    }
    EigenPair& pr = std::get<EigenPair>(picked);
    es.push_back(pr.value);
    vec = std::move(pr.vector);
    residual_fine = pr.residual;
  }
  out.energy = es.size() > 1
                   ? es.back() + (es.back() - es[es.size() - 2]) / 3.0
                   : es.back();
  out.residual = residual_fine / operator_scale(h_fine);
  out.localization = localization_of(h_fine, vec);

  // Ramp-doubling response on the same grid, so discretization bias cancels
  // exactly and only the absorber dependence remains.  A physical mode
  // barely notices; an absorber artifact moves wholesale.
  CapSpec cap2 = cap;
  cap2.eta *= 2.0;
  const OperatorMatrix h2 = assemble_radiating(spec, g, cap2);
  const auto picked2 = pick_by_overlap(h2, es.back(), vec, 0.5);
  if (const auto* err = std::get_if<PickError>(&picked2)) {
    out.fail = "no counterpart under ramp doubling: " + err->why;
    return out;
  }
  const C e2 = std::get<EigenPair>(picked2).value;
  out.cap_sensitivity = std::abs(e2 - es.back());

  if (opt.root_polish) {
    // Trust radius covers the radiation-condition gap between the absorber
    // eigenvalue and the finite-radius root (largest for short truncations)
    // while staying far below the mode spacing.
    const double trust =
        0.25 * (1.0 + std::abs(out.energy)) + 10.0 * out.cap_sensitivity;
    RootOptions ropt;
    ropt.max_iter = 40;
    try {
      const Potential v(spec);
      const SecantResult rt = secant_on_reflection(v, out.energy, ropt, true);
      if (std::abs(rt.energy - out.energy) > trust) {
        out.fail = "reflection root landed outside the trust radius";
        return out;
      }
      // Polishing from both ramp-strength branches turns the sensitivity
      // into a statement about the reported energy: physical modes collapse
      // onto one root from either seed, absorber artifacts do not survive.
      const SecantResult rt2 = secant_on_reflection(
          v, out.energy + (e2 - es.back()), ropt, true);
      if (std::abs(rt2.energy - out.energy) > trust) {
        out.fail = "reflection root landed outside the trust radius";
        return out;
      }
      out.cap_sensitivity = std::abs(rt2.energy - rt.energy);
      out.energy = rt.energy;
      out.residual = rt.residual;
    } catch (const Error& e) {
      // Strongly complex modes can sit beyond the reach of the sideways
      // integration; those keep their absorber energy and eigenvalue
      // sensitivity (the two conventions agree below tolerance at the
      // radii where the integration overflows).  Near-real ones have no
      // such excuse.
      if (std::abs(out.energy.imag()) < 0.5) {
        out.fail =
            std::string("not confirmed by the reflection root: ") + e.what();
        return out;
      }
    }
  }
  out.ok = true;
  return out;
}

std::string format_rejected(const std::vector<RejectedCandidate>& rej,
                            std::size_t limit = 25) {
  std::ostringstream os;
  os.precision(6);
  os << "  Re(E)        Im(E)        residual   cap_sens   localization  reason\n";
  std::size_t shown = 0;
  for (const RejectedCandidate& r : rej) {
    if (shown++ >= limit) {
      os << "  ... and " << rej.size() - limit << " more\n";
      break;
    }
    os << "  " << r.energy.real() << "  " << r.energy.imag() << "  "
       << r.residual << "  " << r.cap_sensitivity << "  " << r.localization
       << "  " << r.reason << "\n";
  }
  return os.str();
}

void detect_dense(const OperatorMatrix& h0, double e_max,
                  const SpectrumOptions& opt, std::vector<Candidate>& cands,
                  std::vector<RejectedCandidate>& rejected) {
  const double scale = operator_scale(h0);
  for (EigenPair& pr : eig(h0)) {
    if (std::abs(pr.value.real()) > e_max + 0.5) continue;
    const double loc = localization_of(h0, pr.vector);
    if (loc < 0.8 * opt.localization_min) {
      rejected.push_back({pr.value, pr.residual / scale, kNaN, loc,
                          "delocalized at detection"});
      continue;
    }
    cands.push_back({pr.value, std::move(pr.vector), loc, pr.residual});
  }
}

void detect_shifted(const OperatorMatrix& h0, double e_max,
                    const SpectrumOptions& opt, std::vector<Candidate>& cands,
                    std::vector<RejectedCandidate>& rejected) {
  const Grid& g = h0.grid();
  const double span = g.x_max - g.x_min;
  const double k_ext =
      std::sqrt(std::max(e_max - h0.exterior_value(), 1.0));
  // Spacing tied to the exterior level spacing 2*pi*k/span so consecutive
  // shift neighborhoods overlap.
  const double de_local = 2.0 * M_PI * k_ext / span;
  // Absorber states cloud the complex plane below the axis and eat into
  // each shift's nearest-count budget, so space shifts well inside the
  // nominal count * de_local coverage radius.
  const double spacing =
      opt.shift_spacing > 0.0
          ? opt.shift_spacing
          : std::max(0.75, 0.125 * opt.shift_count * de_local);
  const double scale = operator_scale(h0);
  for (double re = -e_max; re <= e_max + 0.5 * spacing; re += spacing) {
    for (double im : opt.shift_im_rows) {
      std::vector<EigenPair> pairs;
      try {
        pairs = eig_subset_near(h0, C{re, im}, opt.shift_count);
      } catch (const NonConvergence&) {
        continue;  // neighboring shifts cover the window
      }
      for (EigenPair& pr : pairs) {
        if (std::abs(pr.value.real()) > e_max + 0.5) continue;
        bool dup = false;
        for (const Candidate& c : cands)
          if (std::abs(c.energy - pr.value) <=
              1e-6 * (1.0 + std::abs(pr.value))) {
            dup = true;
            break;
          }
        if (dup) continue;
        const double loc = localization_of(h0, pr.vector);
        if (loc < 0.8 * opt.localization_min) {
          rejected.push_back({pr.value, pr.residual / scale, kNaN, loc,
                              "delocalized at detection"});
          continue;
        }
        cands.push_back({pr.value, std::move(pr.vector), loc, pr.residual});
      }
    }
  }
}

// Sort, deduplicate, label, enforce conjugate closure, refuse empty
// acceptance; shared by the direct and the length-continued paths.
void finalize_modes(Spectrum& sp, const PotentialSpec& spec, double e_max,
                    const SpectrumOptions& opt) {
  std::sort(sp.modes.begin(), sp.modes.end(),
            [](const RZero& a, const RZero& b) {
              return a.energy.real() != b.energy.real()
                         ? a.energy.real() < b.energy.real()
                         : a.energy.imag() < b.energy.imag();
            });
  // Neighboring detection windows can converge onto the same mode.
  std::vector<RZero> unique_modes;
  for (RZero& z : sp.modes) {
    bool dup = false;
    for (RZero& u : unique_modes)
      if (std::abs(u.energy - z.energy) <=
          1e-7 * (1.0 + std::abs(z.energy))) {
        if (z.residual < u.residual) u = z;
        dup = true;
        break;
      }
    if (!dup) unique_modes.push_back(std::move(z));
  }
  sp.modes = std::move(unique_modes);

  for (RZero& z : sp.modes)
    z.kind = std::abs(z.energy.imag()) <= opt.im_tol ? RZeroKind::real
                                                     : RZeroKind::pair_member;

  const bool symmetric = Potential(spec).parity_symmetric();

  // A parity-symmetric potential has an exactly conjugate-closed spectrum,
  // but the two members are computed independently and their root solves
  // stop at slightly different places.  Averaging the pair restores the
  // exact symmetry without biasing either estimate.
  if (symmetric) {
    std::vector<bool> done(sp.modes.size(), false);
    for (std::size_t i = 0; i < sp.modes.size(); ++i) {
      if (done[i] || sp.modes[i].kind == RZeroKind::real) continue;
      for (std::size_t j = i + 1; j < sp.modes.size(); ++j) {
        if (done[j] || sp.modes[j].kind == RZeroKind::real) continue;
        if (std::abs(sp.modes[i].energy - std::conj(sp.modes[j].energy)) >
            std::max(opt.pair_tol,
                     1e-5 * (1.0 + std::abs(sp.modes[i].energy))))
          continue;
        RZero& a = sp.modes[i].energy.imag() > 0.0 ? sp.modes[i] : sp.modes[j];
        RZero& b = sp.modes[i].energy.imag() > 0.0 ? sp.modes[j] : sp.modes[i];
        a.energy = 0.5 * (a.energy + std::conj(b.energy));
        b.energy = std::conj(a.energy);
        a.residual = b.residual = std::max(a.residual, b.residual);
        done[i] = done[j] = true;
        break;
      }
    }
  }

  // For parity-symmetric potentials the spectrum must close under
  // conjugation; unpaired non-real modes are demoted to the rejected table.
  if (symmetric) {
    std::vector<bool> keep(sp.modes.size(), true);
    for (std::size_t i = 0; i < sp.modes.size(); ++i) {
      if (sp.modes[i].kind == RZeroKind::real) continue;
      bool paired = false;
      for (std::size_t j = 0; j < sp.modes.size(); ++j) {
        if (j == i || sp.modes[j].kind == RZeroKind::real) continue;
        if (std::abs(sp.modes[i].energy - std::conj(sp.modes[j].energy)) <=
            opt.pair_tol) {
          paired = true;
          break;
        }
      }
      if (!paired) {
        keep[i] = false;
        sp.rejected.push_back({sp.modes[i].energy, sp.modes[i].residual,
                               sp.modes[i].cap_sensitivity,
                               sp.modes[i].localization,
                               "unpaired non-real mode"});
      }
    }
    std::vector<RZero> paired_modes;
    for (std::size_t i = 0; i < sp.modes.size(); ++i)
      if (keep[i]) paired_modes.push_back(std::move(sp.modes[i]));
    sp.modes = std::move(paired_modes);
    std::sort(sp.modes.begin(), sp.modes.end(),
              [](const RZero& a, const RZero& b) {
                return a.energy.real() != b.energy.real()
                           ? a.energy.real() < b.energy.real()
                           : a.energy.imag() < b.energy.imag();
              });
  }

  if (sp.modes.empty())
    throw NonConvergence(
        "no mode passed the acceptance gates below e_max = " +
        std::to_string(e_max) + "; rejected candidates:\n" +
        format_rejected(sp.rejected));

  std::size_t reals = 0;
  for (const RZero& z : sp.modes)
    if (z.kind == RZeroKind::real) ++reals;
  sp.label = reals == sp.modes.size() ? Phase::unbroken
             : reals == 0             ? Phase::broken
                                      : Phase::mixed;
}

// Continue one accepted mode from the detection radius to the target
// radius.  The reflection root moves smoothly as the radius grows, so
// secant steps seeded from the previous rung track it through a geometric
// ladder.  A second copy marches from a seed offset by the absorber
// sensitivity; the final separation measures how much the reported energy
// still remembers the detection-stage absorber, which replaces
// cap_sensitivity for marched modes.
struct MarchOutcome {
  bool ok = false;
  std::string fail;
  C energy{};
  double residual = 0.0;
  double sensitivity = 0.0;
};

MarchOutcome march_mode(const PotentialSpec& target, double l_det,
                        const RZero& z) {
  MarchOutcome out;
  const double l_target = effective_length(target);
  std::vector<double> rungs;
  for (double l = l_det * 1.35; l < l_target; l *= 1.35) rungs.push_back(l);
  rungs.push_back(l_target);

  RootOptions ropt;
  ropt.max_iter = 40;
  const double off = 3.0 * std::max(z.cap_sensitivity, 1e-9);
  C ea = z.energy;
  C eb = z.energy + off * C{0.8, 0.6};
  double res_a = 0.0;
  try {
    for (double l : rungs) {
      PotentialSpec s = target;
      s.truncation = Truncation::by_length(l);
      const Potential v(s);
      const SecantResult ra = secant_on_reflection(v, ea, ropt, true);
      const SecantResult rb = secant_on_reflection(v, eb, ropt, true);
      ea = ra.energy;
      eb = rb.energy;
      res_a = ra.residual;
    }
  } catch (const Error& e) {
    out.fail = std::string("length continuation failed: ") + e.what();
    return out;
  }
  out.ok = true;
  out.energy = ea;
  out.residual = res_a;
  out.sensitivity = std::abs(ea - eb);
  return out;
}

}  // namespace

Grid default_grid(const PotentialSpec& spec, double e_max, double k_dx) {
  spec.validate();
  if (!(e_max > 0.0) || !(k_dx > 0.0))
    throw DomainError("default_grid needs e_max > 0 and k_dx > 0");
  const double l = effective_length(spec);
  const RampGeometry rg = ramp_geometry(l, spec.p, e_max);
  const double k_wall = std::sqrt(e_max + std::pow(rg.half, spec.p) + 1.0);
  return Grid::symmetric(rg.half, k_dx / k_wall);
}

CapSpec default_cap(const PotentialSpec& spec, double e_max) {
  spec.validate();
  if (!(e_max > 0.0)) throw DomainError("default_cap needs e_max > 0");
  const double l = effective_length(spec);
  const RampGeometry rg = ramp_geometry(l, spec.p, e_max);
  const double e_ref = 1.0 + 0.5 * e_max;
  CapSpec cap;
  cap.width = rg.width;
  cap.order = 5;
  // One-way WKB attenuation A = eta * integral ramp/(2k); 12 nepers leave
  // the transmitted remnant far below the turn-on floor, and doubling eta
  // (the sensitivity probe) still only nudges that floor.
  double absorb = 0.0;
  const int n = 96;
  const double h = rg.width / n;
  for (int i = 0; i < n; ++i) {
    const double x = rg.start + (static_cast<double>(i) + 0.5) * h;
    const double s = (x - rg.start) / rg.width;
    absorb +=
        std::pow(s, cap.order) / (2.0 * std::sqrt(e_ref + std::pow(x, spec.p)));
  }
  absorb *= h;
  cap.eta = 12.0 / absorb;
  return cap;
}

Spectrum compute_spectrum(const PotentialSpec& spec, const Grid& grid,
                          const CapSpec& cap, double e_max,
                          const SpectrumOptions& opt) {
  spec.validate();
  grid.validate();
  cap.validate();
  if (!(e_max > 0.0)) throw DomainError("compute_spectrum needs e_max > 0");

  Spectrum sp;
  sp.spec = spec;
  sp.grid = grid;
  sp.cap = cap;
  sp.detect_length = effective_length(spec);
  sp.e_max = e_max;
  sp.ceiling = e_max;

  const OperatorMatrix h0 = assemble_radiating(spec, grid, cap);
  std::vector<Candidate> cands;
  if (grid.n_points <= opt.dense_limit)
    detect_dense(h0, e_max, opt, cands, sp.rejected);
  else
    detect_shifted(h0, e_max, opt, cands, sp.rejected);

  for (const Candidate& cand : cands) {
    const RefineOutcome r = refine_candidate(spec, cap, grid, cand, opt);
    if (!r.ok) {
      sp.rejected.push_back({cand.energy, kNaN, kNaN, cand.localization, r.fail});
      continue;
    }
    std::string why;
    if (!(r.residual <= opt.residual_tol))
      why = "residual above threshold";
    else if (!(r.cap_sensitivity <= opt.cap_sens_tol))
      why = "sensitive to the absorber strength";
    else if (!(r.localization > opt.localization_min))
      why = "insufficient interior localization";
    else if (std::abs(r.energy.real()) > e_max)
      why = "outside the energy window";
    if (!why.empty()) {
      sp.rejected.push_back(
          {r.energy, r.residual, r.cap_sensitivity, r.localization, why});
      continue;
    }
    RZero z;
    z.energy = r.energy;
    z.residual = r.residual;
    z.cap_sensitivity = r.cap_sensitivity;
    z.localization = r.localization;
    sp.modes.push_back(z);
  }

  finalize_modes(sp, spec, e_max, opt);
  return sp;
}

Spectrum compute_spectrum(const PotentialSpec& spec, double e_max,
                          const SpectrumOptions& opt) {
  spec.validate();
  if (!(e_max > 0.0)) throw DomainError("compute_spectrum needs e_max > 0");
  const double l_target = effective_length(spec);
  const double l_det = dense_feasible_length(spec, e_max, opt);
  if (l_det >= l_target * (1.0 - 1e-12))
    return compute_spectrum(spec, default_grid(spec, e_max, opt.detect_k_dx),
                            default_cap(spec, e_max), e_max, opt);

  // Detection and gating run at the longest radius the dense solver can
  // afford; each survivor is then continued in radius on the reflection
  // root, which needs no grid at all.
  PotentialSpec s_det = spec;
  s_det.truncation = Truncation::by_length(l_det);
  Spectrum inner =
      compute_spectrum(s_det, default_grid(s_det, e_max, opt.detect_k_dx),
                       default_cap(s_det, e_max), e_max, opt);

  Spectrum sp;
  sp.spec = spec;
  sp.grid = inner.grid;
  sp.cap = inner.cap;
  sp.detect_length = l_det;
  sp.e_max = e_max;
  sp.ceiling = e_max;
  sp.rejected = std::move(inner.rejected);
  for (const RZero& z : inner.modes) {
    const MarchOutcome m = march_mode(spec, l_det, z);
    if (!m.ok) {
      sp.rejected.push_back({z.energy, z.residual, z.cap_sensitivity,
                             z.localization, m.fail});
      continue;
    }
    std::string why;
    if (!(m.residual <= opt.residual_tol))
      why = "residual above threshold";
    else if (!(m.sensitivity <= opt.cap_sens_tol))
      why = "sensitive to the absorber strength";
    else if (std::abs(m.energy.real()) > e_max)
      why = "outside the energy window";
    if (!why.empty()) {
      sp.rejected.push_back(
          {m.energy, m.residual, m.sensitivity, z.localization, why});
      continue;
    }
    RZero zm;
    zm.energy = m.energy;
    zm.residual = m.residual;
    zm.cap_sensitivity = m.sensitivity;
    zm.localization = z.localization;
    sp.modes.push_back(zm);
  }
  finalize_modes(sp, spec, e_max, opt);
  return sp;
}

Phase classify(const Spectrum& s, double e_window) {
  if (!(e_window > 0.0)) throw DomainError("classification window must be > 0");
  if (e_window > s.ceiling + 1e-12) {
    std::ostringstream os;
    os << "classification window " << e_window
       << " exceeds the trusted truncation ceiling " << s.ceiling;
    throw DomainError(os.str());
  }
  std::size_t reals = 0, total = 0;
  for (const RZero& z : s.modes) {
    if (std::abs(z.energy.real()) > e_window) continue;
    ++total;
    if (z.kind == RZeroKind::real) ++reals;
  }
  if (total == 0)
    throw DomainError("no R-zeros inside the classification window");
  return reals == total ? Phase::unbroken
         : reals == 0   ? Phase::broken
                        : Phase::mixed;
}

double truncation_ceiling(const Spectrum& a, const Spectrum& b,
                          double rel_tol) {
  const double top = std::min(a.e_max, b.e_max);
  double ceiling = top;
  for (const RZero& za : a.modes) {
    if (std::abs(za.energy.real()) > top) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const RZero& zb : b.modes)
      best = std::min(best, std::abs(za.energy - zb.energy));
    if (best > rel_tol * (1.0 + std::abs(za.energy)))
      ceiling = std::min(ceiling, za.energy.real());
  }
  return ceiling;
}

namespace {

struct Traj {
  C energy;
  std::vector<C> vec;
};

bool is_real_mode(const C& e, double im_tol) {
  return std::abs(e.imag()) <= im_tol;
}

// March all trajectories to the operator h, matching by Hermitian vector
// overlap (same grid on both sides).  Greedy assignment on the global best
// score; a trajectory whose best remaining score drops below ambiguity_min
// is a matching ambiguity.
std::vector<Traj> advance_same_grid(const OperatorMatrix& h,
                                    const std::vector<Traj>& prev,
                                    const EpSearchOptions& opt) {
  std::vector<EigenPair> pool;
  for (const Traj& t : prev) {
    std::vector<EigenPair> pairs = subset_with_retry(h, t.energy, {4, 2});
    for (EigenPair& pr : pairs) {
      bool dup = false;
      for (const EigenPair& q : pool)
        if (std::abs(q.value - pr.value) <=
            1e-9 * (1.0 + std::abs(pr.value))) {
          dup = true;
          break;
        }
      if (!dup) pool.push_back(std::move(pr));
    }
  }
  std::vector<Traj> next(prev.size());
  std::vector<bool> traj_done(prev.size(), false), cand_used(pool.size(), false);
  for (std::size_t round = 0; round < prev.size(); ++round) {
    double best = -1.0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (traj_done[i]) continue;
      for (std::size_t j = 0; j < pool.size(); ++j) {
        if (cand_used[j]) continue;
        if (std::abs(pool[j].value - prev[i].energy) >
            opt.match_tol * (1.0 + std::abs(prev[i].energy)))
          continue;
        const double ov = overlap(prev[i].vec, pool[j].vector);
        if (ov > best) {
          best = ov;
          bi = i;
          bj = j;
        }
      }
    }
    if (best < opt.ambiguity_min) {
      std::ostringstream os;
      os << "trajectory matching ambiguity near E = "
         << prev[bi].energy.real()
         << ": best vector overlap " << best
         << " cannot confirm the continuation";
      throw NonConvergence(os.str());
    }
    traj_done[bi] = true;
    cand_used[bj] = true;
    next[bi].energy = pool[bj].value;
    next[bi].vec = std::move(pool[bj].vector);
  }
  return next;
}

}  // namespace

std::vector<EpCandidate> track_and_find_ep(const PotentialSpec& base,
                                           const std::vector<double>& p_grid,
                                           double band_lo, double band_hi,
                                           const EpSearchOptions& opt) {
  if (p_grid.size() < 2)
    throw DomainError("the p grid needs at least two points");
  for (std::size_t i = 1; i < p_grid.size(); ++i)
    if (!(p_grid[i] > p_grid[i - 1]) && !(p_grid[i] < p_grid[i - 1]))
      throw DomainError("the p grid must be strictly monotone");
  const bool ascending = p_grid.back() > p_grid.front();
  for (std::size_t i = 1; i < p_grid.size(); ++i)
    if (ascending ? !(p_grid[i] > p_grid[i - 1])
                  : !(p_grid[i] < p_grid[i - 1]))
      throw DomainError("the p grid must be strictly monotone");
  if (!(band_lo < band_hi))
    throw DomainError("energy band must satisfy band_lo < band_hi");

  std::vector<double> pd(p_grid);
  std::sort(pd.begin(), pd.end(), std::greater<double>());

  PotentialSpec s = base;
  s.p = pd.front();
  const double target_l = Potential(s).effective_length();
  const double e_scan = band_hi + 2.0;

  // Dense seeding at a reduced length deep enough for this band, then
  // length continuation up to the target truncation.
  const double seed_l =
      opt.seed_l > 0.0
          ? opt.seed_l
          : std::min(target_l,
                     std::max(2.5, std::pow(40.0 * band_hi, 1.0 / pd.front())));
  s.truncation = Truncation::by_length(seed_l);
  std::vector<C> energies;
  {
    const Spectrum seed_sp = compute_spectrum(s, e_scan);
    for (const RZero& z : seed_sp.modes)
      if (z.energy.real() >= band_lo && z.energy.real() <= band_hi)
        energies.push_back(z.energy);
    if (energies.empty())
      throw DomainError("no R-zeros inside the band at the largest p");
    if (energies.size() > static_cast<std::size_t>(opt.band_count))
      energies.resize(opt.band_count);
  }

  std::vector<double> lengths;
  for (double l = seed_l * 1.35; l < target_l; l *= 1.35) lengths.push_back(l);
  lengths.push_back(target_l);
  for (double l : lengths) {
    s.truncation = Truncation::by_length(l);
    const Grid g = default_grid(s, e_scan, opt.k_dx);
    const CapSpec cap = default_cap(s, e_scan);
    const OperatorMatrix h = assemble_radiating(s, g, cap);
    std::vector<C> moved(energies.size());
    for (std::size_t i = 0; i < energies.size(); ++i) {
      const std::vector<EigenPair> pairs =
          subset_with_retry(h, energies[i], {4, 2});
      double best = std::numeric_limits<double>::infinity();
      C pick{};
      for (const EigenPair& pr : pairs) {
        const double d = std::abs(pr.value - energies[i]);
        if (d < best) {
          best = d;
          pick = pr.value;
        }
      }
      if (best > opt.match_tol * (1.0 + std::abs(energies[i])))
        throw NonConvergence(
            "lost a band trajectory during length continuation");
      moved[i] = pick;
    }
    for (std::size_t i = 0; i < moved.size(); ++i)
      for (std::size_t j = i + 1; j < moved.size(); ++j)
        if (std::abs(moved[i] - moved[j]) <=
            1e-9 * (1.0 + std::abs(moved[i])))
          throw NonConvergence(
              "two band trajectories collided during length continuation; "
              "vector overlap cannot confirm matches across different grids");
    energies = std::move(moved);
  }

  // March grid fixed at the largest p (deepest well): valid for the whole
  // family and keeps eigenvectors comparable between p points.
  s.truncation = base.truncation;
  s.p = pd.front();
  const Grid g_march = default_grid(s, e_scan, opt.k_dx);
  const CapSpec cap_march = default_cap(s, e_scan);

  auto assemble_at = [&](double p, const Grid& g) {
    PotentialSpec sp = base;
    sp.p = p;
    return assemble_radiating(sp, g, cap_march);
  };

  std::vector<Traj> traj;
  {
    const OperatorMatrix h = assemble_at(pd.front(), g_march);
    for (const C& e : energies) {
      const std::vector<EigenPair> pairs = subset_with_retry(h, e, {4, 2});
      double best = std::numeric_limits<double>::infinity();
      std::size_t pick = 0;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double d = std::abs(pairs[i].value - e);
        if (d < best) {
          best = d;
          pick = i;
        }
      }
      if (best > opt.match_tol * (1.0 + std::abs(e)))
        throw NonConvergence("band mode not recovered on the march grid");
      traj.push_back({pairs[pick].value, pairs[pick].vector});
    }
  }

  const Grid g_fine = doubled(g_march);

  // Bisection helper: march the two coalescing modes from the stored
  // real-side state to p on the verification grid, report whether the pair
  // is still real there.
  struct PairState {
    Traj a, b;
  };
  auto advance_pair = [&](const PairState& st, double p,
                          const Grid& g) -> PairState {
    const OperatorMatrix h = assemble_at(p, g);
    std::vector<EigenPair> pool;
    for (const Traj* t : {&st.a, &st.b}) {
      std::vector<EigenPair> pairs = subset_with_retry(h, t->energy, {4, 2});
      for (EigenPair& pr : pairs) {
        bool dup = false;
        for (const EigenPair& q : pool)
          if (std::abs(q.value - pr.value) <=
              1e-9 * (1.0 + std::abs(pr.value))) {
            dup = true;
            break;
          }
        if (!dup) pool.push_back(std::move(pr));
      }
    }
    // 2x2 assignment maximizing total overlap; the pair is expected to be
    // nearly parallel close to coalescence, so no ambiguity gate here.
    double best = -1.0;
    std::size_t ba = 0, bb = 1;
    for (std::size_t i = 0; i < pool.size(); ++i)
      for (std::size_t j = 0; j < pool.size(); ++j) {
        if (i == j) continue;
        if (std::abs(pool[i].value - st.a.energy) >
                opt.match_tol * (1.0 + std::abs(st.a.energy)) ||
            std::abs(pool[j].value - st.b.energy) >
                opt.match_tol * (1.0 + std::abs(st.b.energy)))
          continue;
        const double sc = overlap(st.a.vec, pool[i].vector) +
                          overlap(st.b.vec, pool[j].vector);
        if (sc > best) {
          best = sc;
          ba = i;
          bb = j;
        }
      }
    if (best < 0.0)
      throw NonConvergence("coalescing pair lost during bisection");
    PairState out;
    out.a = {pool[ba].value, std::move(pool[ba].vector)};
    out.b = {pool[bb].value, std::move(pool[bb].vector)};
    return out;
  };

  std::vector<EpCandidate> found;

  auto bisect_ep = [&](double p_lo, double p_hi,
                       const PairState& real_side_march) -> EpCandidate {
    // Verification happens on the doubled grid: the pair state moves there
    // by prolongation once, then tracks bisection midpoints.
    PairState hi_state;
    {
      PairState lifted;
      lifted.a = {real_side_march.a.energy, prolong(real_side_march.a.vec)};
      lifted.b = {real_side_march.b.energy, prolong(real_side_march.b.vec)};
      hi_state = advance_pair(lifted, p_hi, g_fine);
    }
    double lo = p_lo, hi = p_hi;
    double last_overlap =
        overlap(hi_state.a.vec, hi_state.b.vec);
    const double floor_width = 1e-5;
    while (hi - lo > opt.p_tol ||
           (last_overlap < opt.overlap_min && hi - lo > floor_width)) {
      const double mid = 0.5 * (lo + hi);
      const PairState ms = advance_pair(hi_state, mid, g_fine);
      const bool real_pair = is_real_mode(ms.a.energy, opt.im_tol) &&
                             is_real_mode(ms.b.energy, opt.im_tol);
      if (real_pair) {
        hi = mid;
        hi_state = ms;
        last_overlap = overlap(hi_state.a.vec, hi_state.b.vec);
      } else {
        lo = mid;
      }
    }
    if (last_overlap < opt.overlap_min) {
      std::ostringstream os;
      os << "eigenvalue collision near p = " << 0.5 * (lo + hi)
         << " lacks eigenvector coalescence (overlap " << last_overlap
         << "); refusing the exceptional-point label";
      throw NonConvergence(os.str());
    }

    // Continuum-extrapolated energies at the closest real-side point.
    const Grid g_fine2 = doubled(g_fine);
    PairState lifted2;
    lifted2.a = {hi_state.a.energy, prolong(hi_state.a.vec)};
    lifted2.b = {hi_state.b.energy, prolong(hi_state.b.vec)};
    const PairState fs = advance_pair(lifted2, hi, g_fine2);
    const C ea = fs.a.energy + (fs.a.energy - hi_state.a.energy) / 3.0;
    const C eb = fs.b.energy + (fs.b.energy - hi_state.b.energy) / 3.0;

    EpCandidate ep;
    ep.p_star = 0.5 * (lo + hi);
    ep.e_star = 0.5 * (ea.real() + eb.real());
    ep.min_gap = std::abs(ea - eb);
    ep.vector_overlap = last_overlap;
    ep.bracket_lo = lo;
    ep.bracket_hi = hi;
    return ep;
  };

  for (std::size_t step = 1; step < pd.size(); ++step) {
    const double p_prev = pd[step - 1], p_next = pd[step];
    const OperatorMatrix h = assemble_at(p_next, g_march);
    std::vector<Traj> moved = advance_same_grid(h, traj, opt);

    // A real pair that left the axis between p_prev and p_next marks a
    // candidate transition; it must leave as a conjugate pair.
    std::vector<bool> flagged(traj.size(), false);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      if (flagged[i]) continue;
      if (!is_real_mode(traj[i].energy, opt.im_tol) ||
          is_real_mode(moved[i].energy, opt.im_tol))
        continue;
      std::size_t partner = traj.size();
      for (std::size_t j = 0; j < traj.size(); ++j) {
        if (j == i || flagged[j]) continue;
        if (!is_real_mode(traj[j].energy, opt.im_tol) ||
            is_real_mode(moved[j].energy, opt.im_tol))
          continue;
        if (std::abs(moved[i].energy - std::conj(moved[j].energy)) <=
            1e-6 * (1.0 + std::abs(moved[i].energy))) {
          partner = j;
          break;
        }
      }
      if (partner == traj.size())
        throw NonConvergence(
            "a real trajectory left the axis without a conjugate partner");
      flagged[i] = flagged[partner] = true;
      PairState real_side{traj[i], traj[partner]};
      found.push_back(bisect_ep(p_next, p_prev, real_side));
    }
    traj = std::move(moved);
  }

  std::sort(found.begin(), found.end(),
            [](const EpCandidate& a, const EpCandidate& b) {
              return a.p_star < b.p_star;
            });
  return found;
}

RZero refine_by_reflection_root(const PotentialSpec& spec, C e_guess,
                                const RootOptions& opt) {
  spec.validate();
  const Potential v(spec);
  const SecantResult s = secant_on_reflection(v, e_guess, opt, false);
  RZero out;
  out.energy = s.energy;
  out.residual = s.residual;
  out.cap_sensitivity = kNaN;
  out.localization = kNaN;
  out.kind = std::abs(s.energy.imag()) <= opt.im_tol ? RZeroKind::real
                                                     : RZeroKind::pair_member;
  return out;
}

}  // namespace rsm
