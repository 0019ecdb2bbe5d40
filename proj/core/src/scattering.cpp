#include "rsm/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rsm/errors.hpp"
#include "rsm/ode.hpp"

namespace rsm {
namespace {

using C = std::complex<double>;
constexpr C I{0.0, 1.0};

}  // namespace

double matching_point(const Potential& v, double tol) {
  return v.settle_radius(tol);
}

ScatteringResult scatter(const ScatterProblem& prob, C E,
                         const ScatteringOptions& opt) {
  if (!(prob.x_match > 0.0))
    throw DomainError("scatter problem needs x_match > 0");
  const double X = prob.x_match;
  const C k = std::sqrt(E - prob.v_ext);
  if (E.imag() == 0.0 && E.real() <= prob.v_ext)
    throw DomainError("scattering energy must lie above the exterior level");

  const OdeRhs rhs = [&prob, E](double x, const OdeState& u) -> OdeState {
    return {u[1], (prob.v(x) - E) * u[0]};
  };
  OdeOptions oopt;
  oopt.rtol = opt.rtol;
  oopt.atol = opt.atol;
  oopt.breakpoints = prob.breakpoints;

  // Integrate across the interior starting from a unit outgoing wave on the
  // transmission side; A and B are the plane-wave coefficients recovered on
  // the incidence side, scaled by e^{-log_scale}.
  C A, B;
  double ls = 0.0;
  if (opt.incidence == Incidence::left) {
    const OdeResult r = integrate(rhs, X, -X, {C{1.0}, I * k}, oopt);
    A = 0.5 * (r.u[0] - I * r.u[1] / k);
    B = 0.5 * (r.u[0] + I * r.u[1] / k);
    ls = r.log_scale;
  } else {
    const OdeResult r = integrate(rhs, -X, X, {C{1.0}, -I * k}, oopt);
    A = 0.5 * (r.u[0] - I * r.u[1] / k);  // reflected-wave coefficient
    B = 0.5 * (r.u[0] + I * r.u[1] / k);
    ls = r.log_scale;
    std::swap(A, B);  // mirrored roles: B' carries 1/T', A' carries R'/T'
  }

  ScatteringResult out;
  out.E = E;
  out.incidence = opt.incidence;
  out.k = k;
  out.match_x = X;
  const C phase = std::exp(-2.0 * I * k * X);
  out.R = (B / A) * phase;
  out.T = phase * std::exp(C{-ls}) / A;
  // |R/T| = |B| e^{ls}; mapping through r^2/(1+r^2) keeps the reflectance in
  // [0,1] even when flux conservation is only approximate, and the log-domain
  // branch survives |R/T| past the overflow threshold.
  const double log_rt = std::log(std::abs(B)) + ls;
  out.ratio_RT = std::exp(log_rt);
  if (log_rt <= 0.0) {
    const double rt2 = std::exp(2.0 * log_rt);
    out.reflectance = rt2 / (1.0 + rt2);
  } else {
    out.reflectance = 1.0 / (1.0 + std::exp(-2.0 * log_rt));
  }
  out.flux_error = std::norm(out.R) + std::norm(out.T) - 1.0;
  return out;
}

ScatteringResult scatter(const Potential& v, C E,
                         const ScatteringOptions& opt) {
  ScatterProblem prob;
  prob.v = [&v](double x) { return v(x); };
  prob.v_ext = v.exterior_value();
  prob.x_match = opt.match_x > 0.0 ? opt.match_x : matching_point(v, opt.match_tol);
  return scatter(prob, E, opt);
}

ContinuedReflection continued_reflection(const Potential& v, C E, double rtol,
                                         double atol) {
  // V is real, so r(conj E) = conj(r(E)); folding the lower half-plane onto
  // the upper keeps the launched outgoing branch the growing one along the
  // integration path, which is the numerically stable direction.
  const bool folded = E.imag() < 0.0;
  if (folded) E = std::conj(E);
  const double v_ext = v.exterior_value();
  if (std::abs(E - v_ext) < 0.02 * (std::abs(v_ext) + 1.0))
    throw DomainError("energy sits at the branch point of the exterior channel");
  const C k = std::sqrt(E - v_ext);
  const double l = v.effective_length();
  const double X = v.settle_radius(1e-9);

  // Nepers of branch contrast accumulated across the span; the integrator's
  // rescaling keeps the ratio finite well past 1e308, but runaway spans are
  // cut off before they burn unbounded step counts.
  double contrast = 0.0;
  {
    const int n = 192;
    const double h = 2.0 * X / n;
    for (int i = 0; i < n; ++i) {
      const double x = -X + (static_cast<double>(i) + 0.5) * h;
      contrast += std::abs(std::sqrt(E - v(x)).imag());
    }
    contrast *= h;
  }
  if (contrast > 600.0)
    throw NonConvergence(
        "channel contrast across the well is too large at this energy");

  const OdeRhs rhs = [&v, E](double x, const OdeState& u) -> OdeState {
    return {u[1], (v(x) - E) * u[0]};
  };
  OdeOptions oopt;
  oopt.rtol = rtol;
  oopt.atol = atol;
  oopt.breakpoints = {-l, 0.0, l};  // window shoulders; origin kink for p < 2

  // Same construction as the left-incidence scatter: launch the transmitted
  // wave at +X, read the plane-wave coefficients at -X.  r = B/A vanishes
  // exactly where the axis reflection does, and |r| equals |R| at real E;
  // only the phase reference (the settle radius, not the origin) differs.
  const OdeResult res = integrate(rhs, X, -X, {C{1.0}, I * k}, oopt);
  const C A = 0.5 * (res.u[0] - I * res.u[1] / k);
  const C B = 0.5 * (res.u[0] + I * res.u[1] / k);
  ContinuedReflection out;
  out.contrast = contrast;
  out.r = B / A;  // log_scale cancels in the ratio
  if (folded) out.r = std::conj(out.r);
  return out;
}

std::vector<ScatteringResult> scatter_curve(const Potential& v,
                                            const std::vector<double>& energies,
                                            const ScatteringOptions& opt) {
  ScatteringOptions o = opt;
  if (o.match_x <= 0.0) o.match_x = matching_point(v, o.match_tol);
  std::vector<ScatteringResult> out;
  out.reserve(energies.size());
  for (double e : energies) out.push_back(scatter(v, C{e}, o));
  return out;
}

std::vector<ScatteringResult> reflectance_curve(
    const Potential& v, const std::vector<double>& energies,
    const ScatteringOptions& opt) {
  ScatteringOptions o = opt;
  if (o.match_x <= 0.0) o.match_x = matching_point(v, o.match_tol);
  std::vector<ScatteringResult> curve = scatter_curve(v, energies, o);
  std::sort(curve.begin(), curve.end(),
            [](const ScatteringResult& a, const ScatteringResult& b) {
              return a.E.real() < b.E.real();
            });

  const double res = o.dip_resolution;
  auto eval = [&](double e) { return scatter(v, C{e}, o); };

  std::vector<ScatteringResult> extra;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    if (!(curve[i].reflectance < curve[i - 1].reflectance &&
          curve[i].reflectance < curve[i + 1].reflectance))
      continue;
    // Ternary search on the bracketing interval; every sample is kept, which
    // leaves a geometric ladder of points descending into the dip — exactly
    // what a local power-law fit needs.
    double a = curve[i - 1].E.real(), b = curve[i + 1].E.real();
    double m1 = 0.0, m2 = 0.0;
    ScatteringResult r1, r2;
    bool have = false;
    while (b - a > res) {
      m1 = a + (b - a) / 3.0;
      m2 = b - (b - a) / 3.0;
      r1 = eval(m1);
      r2 = eval(m2);
      extra.push_back(r1);
      extra.push_back(r2);
      have = true;
      if (r1.reflectance < r2.reflectance)
        b = m2;
      else
        a = m1;
    }
    const double e_dip = have && r1.reflectance < r2.reflectance ? m1
                         : have                                  ? m2
                                 : 0.5 * (a + b);
    // A two-sided geometric ladder anchored at the located minimum, so both
    // flanks carry samples at comparable distances.
    const double lo = curve[i - 1].E.real(), hi = curve[i + 1].E.real();
    for (int j = 0; j <= 10; ++j) {
      const double d = res * std::pow(2.0, j);
      if (e_dip - d > lo) extra.push_back(eval(e_dip - d));
      if (e_dip + d < hi) extra.push_back(eval(e_dip + d));
    }
  }

  curve.insert(curve.end(), extra.begin(), extra.end());
  std::sort(curve.begin(), curve.end(),
            [](const ScatteringResult& a, const ScatteringResult& b) {
              return a.E.real() < b.E.real();
            });
  curve.erase(std::unique(curve.begin(), curve.end(),
                          [](const ScatteringResult& a,
                             const ScatteringResult& b) {
                            return a.E.real() == b.E.real();
                          }),
              curve.end());
  return curve;
}

DipCharacterization characterize_dip(const std::vector<ScatteringResult>& curve,
                                     double e_dip_guess) {
  if (curve.size() < 8)
    throw DomainError("dip characterization needs a sampled curve");

  // Nearest strict local minimum of the sampled reflectance.
  std::size_t dip = curve.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    if (curve[i].reflectance < curve[i - 1].reflectance &&
        curve[i].reflectance < curve[i + 1].reflectance) {
      const double d = std::abs(curve[i].E.real() - e_dip_guess);
      if (d < best) {
        best = d;
        dip = i;
      }
    }
  }
  if (dip == curve.size())
    throw NonConvergence("no local reflectance minimum found near the guess");

  DipCharacterization out;
  out.E_dip = curve[dip].E.real();
  out.depth = curve[dip].reflectance;

  // The sampled minimum can sit a full ladder step off the true dip centre,
  // which would warp log-distances at the inner edge of the fit band;
  // re-centre on the vertex of the parabola through the three lowest points.
  {
    const double x0 = curve[dip - 1].E.real(), x1 = curve[dip].E.real(),
                 x2 = curve[dip + 1].E.real();
    const double y0 = curve[dip - 1].reflectance, y1 = curve[dip].reflectance,
                 y2 = curve[dip + 1].reflectance;
    const double den =
        2.0 * (y0 * (x1 - x2) + y1 * (x2 - x0) + y2 * (x0 - x1));
    if (std::abs(den) > 0.0) {
      const double vx = (y0 * (x1 * x1 - x2 * x2) + y1 * (x2 * x2 - x0 * x0) +
                         y2 * (x0 * x0 - x1 * x1)) /
                        den;
      if (vx > x0 && vx < x2) out.E_dip = vx;
    }
  }

  // Decade band above the floor: only samples with reflectance within
  // [10 depth, 10^3 depth] enter the fit, pooled from both flanks.
  const double band_lo = 10.0 * out.depth, band_hi = 1e3 * out.depth;
  std::vector<double> lx, ly;
  int n_left = 0, n_right = 0;
  out.window_lo = std::numeric_limits<double>::infinity();
  out.window_hi = 0.0;
  auto try_side = [&](std::size_t i) {
    const double r = curve[i].reflectance;
    if (!(r >= band_lo && r <= band_hi)) return false;
    const double d = std::abs(curve[i].E.real() - out.E_dip);
    if (d <= 0.0) return false;
    lx.push_back(std::log(d));
    ly.push_back(std::log(r));
    out.window_lo = std::min(out.window_lo, d);
    out.window_hi = std::max(out.window_hi, d);
    return true;
  };
  for (std::size_t i = dip; i-- > 0;) {
    if (curve[i].reflectance > band_hi) break;
    if (try_side(i)) ++n_left;
  }
  for (std::size_t i = dip + 1; i < curve.size(); ++i) {
    if (curve[i].reflectance > band_hi) break;
    if (try_side(i)) ++n_right;
  }
  if (n_left < 2 || n_right < 2 || lx.size() < 6)
    throw NonConvergence(
        "dip not resolved above the sampling floor (floor reflectance " +
        std::to_string(out.depth) + "); refine the curve further");

  // Least-squares line in log-log coordinates.
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t j = 0; j < lx.size(); ++j) {
    sx += lx[j];
    sy += ly[j];
    sxx += lx[j] * lx[j];
    sxy += lx[j] * ly[j];
  }
  const double denom = n * sxx - sx * sx;
  if (!(std::abs(denom) > 0))
    throw NonConvergence("degenerate abscissas in dip fit");
  out.exponent = (n * sxy - sx * sy) / denom;
  const double icept = (sy - out.exponent * sx) / n;
  double ss = 0;
  for (std::size_t j = 0; j < lx.size(); ++j) {
    const double e = ly[j] - (out.exponent * lx[j] + icept);
    ss += e * e;
  }
  out.fit_residual = std::sqrt(ss / n);
  out.points_used = static_cast<int>(lx.size());
  return out;
}

}  // namespace rsm
