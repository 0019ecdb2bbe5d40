#include "rsm/ode.hpp"

#include <algorithm>
#include <cmath>

#include "rsm/errors.hpp"

namespace rsm {
namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Difference between the fifth- and fourth-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double rescale_threshold = 1e150;

struct StepResult {
  OdeState u;   // fifth-order solution at x + h
  OdeState k7;  // slope there; next step's k1 (first-same-as-last)
  double err;   // scaled error estimate, accept when <= 1
};

StepResult dp_step(const OdeRhs& f, double x, double h, const OdeState& u,
                   const OdeState& k1, double rtol, double atol) {
  OdeState t;
  for (int i = 0; i < 2; ++i) t[i] = u[i] + h * (a21 * k1[i]);
  const OdeState k2 = f(x + c2 * h, t);
  for (int i = 0; i < 2; ++i) t[i] = u[i] + h * (a31 * k1[i] + a32 * k2[i]);
  const OdeState k3 = f(x + c3 * h, t);
  for (int i = 0; i < 2; ++i)
    t[i] = u[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
  const OdeState k4 = f(x + c4 * h, t);
  for (int i = 0; i < 2; ++i)
    t[i] = u[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
  const OdeState k5 = f(x + c5 * h, t);
  for (int i = 0; i < 2; ++i)
    t[i] = u[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                       a65 * k5[i]);
  const OdeState k6 = f(x + h, t);

  StepResult r;
  for (int i = 0; i < 2; ++i)
    r.u[i] = u[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                         b6 * k6[i]);
  r.k7 = f(x + h, r.u);

  double acc = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double e =
        std::abs(h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                      e6 * k6[i] + e7 * r.k7[i]));
    const double sc = atol + rtol * std::max(std::abs(u[i]), std::abs(r.u[i]));
    acc += (e / sc) * (e / sc);
  }
  r.err = std::sqrt(0.5 * acc);
  if (!std::isfinite(r.err)) r.err = 1e10;  // overflow inside a trial step
  return r;
}

void rescale_if_large(OdeState& u, OdeState& k1, double& log_scale) {
  const double m = std::max(std::abs(u[0]), std::abs(u[1]));
  if (m > rescale_threshold) {
    for (int i = 0; i < 2; ++i) {
      u[i] /= m;
      k1[i] /= m;
    }
    log_scale += std::log(m);
  }
}

}  // namespace

OdeResult integrate(const OdeRhs& rhs, double x0, double x1, OdeState u0,
                    const OdeOptions& opt) {
  OdeResult res;
  res.u = u0;
  if (x0 == x1) return res;
  const double dir = x1 > x0 ? 1.0 : -1.0;
  const double span = std::abs(x1 - x0);

  std::vector<double> nodes;
  nodes.push_back(x0);
  for (double b : opt.breakpoints)
    if ((b - x0) * dir > 0.0 && (x1 - b) * dir > 0.0) nodes.push_back(b);
  std::sort(nodes.begin(), nodes.end());
  if (dir < 0) std::reverse(nodes.begin(), nodes.end());
  nodes.push_back(x1);

  const double h_max = opt.h_max > 0.0 ? opt.h_max : span;
  double h = std::min(opt.h_init > 0.0 ? opt.h_init : span / 100.0, h_max);

  for (std::size_t seg = 0; seg + 1 < nodes.size(); ++seg) {
    const double s0 = nodes[seg];
    const double s1 = nodes[seg + 1];
    double x = s0;
    if (x == s1) continue;
    // Stage positions that fall exactly on a segment boundary are nudged one
    // ulp inward, so a piecewise RHS is always sampled on this segment's
    // side of a jump no matter which value the callable assigns at the node.
    const OdeRhs seg_rhs = [&rhs, s0, s1](double xx, const OdeState& uu) {
      if (xx == s0) xx = std::nextafter(s0, s1);
      else if (xx == s1) xx = std::nextafter(s1, s0);
      return rhs(xx, uu);
    };
    // First-same-as-last does not carry across a node: the RHS may jump.
    OdeState k1 = seg_rhs(x, res.u);
    while ((s1 - x) * dir > 0.0) {
      const double remaining = std::abs(s1 - x);
      const bool lands = h >= remaining;
      const double h_use = lands ? remaining : h;
      const StepResult st =
          dp_step(seg_rhs, x, dir * h_use, res.u, k1, opt.rtol, opt.atol);
      if (st.err <= 1.0) {
        x = lands ? s1 : x + dir * h_use;
        res.u = st.u;
        k1 = st.k7;
        ++res.steps;
        rescale_if_large(res.u, k1, res.log_scale);
      } else {
        ++res.rejected;
      }
      const double fac =
          st.err > 0.0
              ? std::clamp(0.9 * std::pow(st.err, -0.2), 0.2, 5.0)
              : 5.0;
      h = std::min(h_use * fac, h_max);
      if (h < 1e-14 * span)
        throw NonConvergence("ode step size underflow at x = " +
                             std::to_string(x));
      if (res.steps + res.rejected > opt.max_steps)
        throw NonConvergence("ode step budget exhausted at x = " +
                             std::to_string(x));
    }
  }
  return res;
}

OdeResult integrate_fixed(const OdeRhs& rhs, double x0, double x1, OdeState u0,
                          std::size_t n_steps) {
  if (n_steps == 0) throw DomainError("integrate_fixed needs n_steps >= 1");
  OdeResult res;
  res.u = u0;
  if (x0 == x1) return res;
  const double h = (x1 - x0) / static_cast<double>(n_steps);
  const OdeRhs end_rhs = [&rhs, x0, x1](double xx, const OdeState& uu) {
    if (xx == x0) xx = std::nextafter(x0, x1);
    else if (xx == x1) xx = std::nextafter(x1, x0);
    return rhs(xx, uu);
  };
  OdeState k1 = end_rhs(x0, res.u);
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double x = x0 + static_cast<double>(i) * h;
    const StepResult st = dp_step(end_rhs, x, h, res.u, k1, 1.0, 1.0);
    res.u = st.u;
    k1 = st.k7;
    ++res.steps;
    rescale_if_large(res.u, k1, res.log_scale);
  }
  return res;
}

}  // namespace rsm
