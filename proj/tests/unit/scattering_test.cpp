#include "rsm/scattering.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>

#include "rsm/errors.hpp"

using namespace rsm;
using C = std::complex<double>;

namespace {

constexpr C I{0.0, 1.0};

// Closed-form amplitudes for the sharp well V = -V0 on (-a, a), matched to
// e^{ikx} + R e^{-ikx} | T e^{ikx}.
struct WellExact {
  C R, T;
};

WellExact square_well_exact(double E, double v0, double a) {
  const double k = std::sqrt(E), kp = std::sqrt(E + v0);
  const double s = std::sin(2.0 * kp * a), c = std::cos(2.0 * kp * a);
  const C inv_t =
      std::exp(2.0 * I * k * a) *
      (c - I * 0.5 * (k / kp + kp / k) * s);
  WellExact w;
  w.T = 1.0 / inv_t;
  w.R = I * 0.5 * (kp / k - k / kp) * s * w.T;
  return w;
}

ScatterProblem square_well(double v0, double a, double x_match) {
  ScatterProblem prob;
  prob.v = [v0, a](double x) { return std::abs(x) < a ? -v0 : 0.0; };
  prob.v_ext = 0.0;
  prob.x_match = x_match;
  if (x_match > a) prob.breakpoints = {-a, a};
  return prob;
}

PotentialSpec quartic_spec() {
  PotentialSpec spec;
  spec.p = 4.0;
  spec.truncation = Truncation::by_length(6.0);
  spec.w = 1000.0;
  return spec;
}

}  // namespace

TEST_SUITE("scattering") {

TEST_CASE("free particle: no reflection, unit transmission") {
  ScatterProblem prob;
  prob.v = [](double) { return 0.0; };
  prob.v_ext = 0.0;
  prob.x_match = 1.0;
  const auto r = scatter(prob, C{2.0});
  CHECK(std::abs(r.R) < 1e-11);
  CHECK(std::abs(r.T - 1.0) < 1e-10);
  CHECK(r.reflectance < 1e-20);
  CHECK(std::abs(r.flux_error) < 1e-10);
}

TEST_CASE("square well reproduces the closed form") {
  const double v0 = 5.0, a = 1.0;
  for (double E : {0.5, 3.0, 10.7, 40.0}) {
    const auto exact = square_well_exact(E, v0, a);
    const auto got = scatter(square_well(v0, a, a), C{E});
    CHECK(std::abs(got.R - exact.R) < 1e-10);
    CHECK(std::abs(got.T - exact.T) < 1e-10);
    CHECK(std::abs(got.flux_error) < 1e-10);
  }
}

TEST_CASE("square well via interior breakpoints: same amplitudes") {
  // Matching farther out must not change R or T; the jumps at +-a are
  // handled by forced nodes.
  const double v0 = 5.0, a = 1.0;
  const double E = 3.0;
  const auto exact = square_well_exact(E, v0, a);
  const auto got = scatter(square_well(v0, a, 2.5), C{E});
  CHECK(std::abs(got.R - exact.R) < 1e-10);
  CHECK(std::abs(got.T - exact.T) < 1e-10);
}

TEST_CASE("matching point clears the tail for sharp and soft windows") {
  for (double w : {1000.0, 10.0, 1.0}) {
    PotentialSpec spec = quartic_spec();
    spec.w = w;
    Potential v(spec);
    const double X = matching_point(v, 1e-10);
    CHECK(X > v.effective_length());
    CHECK(std::abs(v(X) - v.exterior_value()) < 1e-10);
    CHECK(std::abs(v(-X) - v.exterior_value()) < 1e-10);
  }
}

TEST_CASE("truncated power well: flux conserved over the energy range") {
  Potential v(quartic_spec());
  for (double E : {0.5, 1.477, 5.97, 20.0, 120.0}) {
    const auto r = scatter(v, C{E});
    CHECK(std::abs(r.flux_error) < 1e-9);
    CHECK(r.reflectance >= 0.0);
    CHECK(r.reflectance <= 1.0);
  }
}

TEST_CASE("symmetric potential scatters identically from both sides") {
  Potential v(quartic_spec());
  ScatteringOptions left, right;
  right.incidence = Incidence::right;
  const C E{5.2};
  const auto rl = scatter(v, E, left);
  const auto rr = scatter(v, E, right);
  CHECK(std::abs(rl.R - rr.R) < 1e-9);
  CHECK(std::abs(rl.T - rr.T) < 1e-9);
}

TEST_CASE("parity-breaking noise: reciprocal transmission, unequal reflection") {
  PotentialSpec spec = quartic_spec();
  NoiseSpec ns;
  ns.kind = NoiseKind::parity_breaking;
  ns.strength = 0.05;
  ns.seed = 3;
  spec.perturbation = ns;
  Potential v(spec);
  ScatteringOptions left, right;
  right.incidence = Incidence::right;
  const C E{5.2};
  const auto rl = scatter(v, E, left);
  const auto rr = scatter(v, E, right);
  CHECK(std::abs(rl.T - rr.T) < 1e-8);  // 1-D transmission is reciprocal
  CHECK(std::abs(rl.R - rr.R) > 1e-4);
}

TEST_CASE("amplitudes do not depend on where the matching point sits") {
  Potential v(quartic_spec());
  ScatteringOptions near, far;
  far.match_x = matching_point(v, 1e-10) + 2.0;
  const C E{5.97};
  const auto a = scatter(v, E, near);
  const auto b = scatter(v, E, far);
  CHECK(std::abs(a.R - b.R) < 1e-8);
  CHECK(std::abs(a.T - b.T) < 1e-8);
}

TEST_CASE("limits: opaque near the exterior floor, transparent high up") {
  Potential v(quartic_spec());
  const double floor = v.exterior_value();
  const auto lo = scatter(v, C{floor + 0.01});
  CHECK(lo.reflectance > 0.99);
  const auto hi = scatter(v, C{1e5});
  CHECK(hi.reflectance < 1e-3);
}

TEST_CASE("curve helper shares the matching point and keeps order") {
  Potential v(quartic_spec());
  const std::vector<double> es{3.0, 4.0, 5.0};
  const auto curve = scatter_curve(v, es);
  REQUIRE(curve.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(curve[i].match_x == curve[0].match_x);
    CHECK(std::abs(curve[i].k.real() - std::sqrt(es[i] - v.exterior_value())) <
          1e-12);
  }
}

TEST_CASE("result records energy, incidence side and |R/T|") {
  const auto r = scatter(square_well(5.0, 1.0, 1.0), C{3.0});
  CHECK(r.E == C{3.0});
  CHECK(r.incidence == Incidence::left);
  CHECK(r.ratio_RT == doctest::Approx(std::abs(r.R / r.T)).epsilon(1e-9));
  ScatteringOptions o;
  o.incidence = Incidence::right;
  CHECK(scatter(square_well(5.0, 1.0, 1.0), C{3.0}, o).incidence ==
        Incidence::right);
}

TEST_CASE("synthetic quadratic dip: exponent recovered from the decade band") {
  // reflectance = floor + (E - E0)^2 sampled on a geometric ladder; the
  // decade band [10 floor, 1000 floor] then sits at |E - E0| in
  // [3.2e-4, 3.2e-3].
  const double e0 = 5.0, floor = 1e-8;
  std::vector<ScatteringResult> curve;
  auto put = [&](double e) {
    ScatteringResult s;
    s.E = C{e};
    s.reflectance = floor + (e - e0) * (e - e0);
    curve.push_back(s);
  };
  put(e0);
  for (int j = 0; j <= 20; ++j) {
    const double d = 1e-4 * std::pow(1.5, j);
    put(e0 - d);
    put(e0 + d);
  }
  std::sort(curve.begin(), curve.end(),
            [](const ScatteringResult& a, const ScatteringResult& b) {
              return a.E.real() < b.E.real();
            });
  const auto fit = characterize_dip(curve, 5.02);
  CHECK(fit.E_dip == doctest::Approx(e0).epsilon(1e-9));
  CHECK(fit.depth == floor);
  CHECK(std::abs(fit.exponent - 2.0) < 0.15);
  CHECK(fit.fit_residual < 0.05);
  CHECK(fit.points_used >= 6);
  CHECK(fit.window_lo > 2.5e-4);
  CHECK(fit.window_hi < 4e-3);
}

TEST_CASE("dip sampled only far above its floor is refused") {
  const double e0 = 5.0, floor = 1e-8;
  std::vector<ScatteringResult> curve;
  auto put = [&](double e, double r) {
    ScatteringResult s;
    s.E = C{e};
    s.reflectance = r;
    curve.push_back(s);
  };
  for (int j = 5; j >= 1; --j) put(e0 - 0.1 * j, floor + 0.01 * j * j);
  put(e0, floor);
  for (int j = 1; j <= 5; ++j) put(e0 + 0.1 * j, floor + 0.01 * j * j);
  CHECK_THROWS_AS((void)characterize_dip(curve, e0), NonConvergence);
}

TEST_CASE("curve refinement resolves the quartic-well dip") {
  Potential v(quartic_spec());
  std::vector<double> grid;
  for (double e = 1.3; e < 1.7 + 1e-9; e += 0.05) grid.push_back(e);
  const auto curve = reflectance_curve(v, grid);
  CHECK(curve.size() > grid.size());
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(curve[i].E.real() > curve[i - 1].E.real());

  const auto fit = characterize_dip(curve, 1.5);
  CHECK(fit.E_dip > 1.45);
  CHECK(fit.E_dip < 1.55);
  CHECK(fit.depth < 1e-4);
  CHECK(std::abs(fit.exponent - 2.0) < 0.3);
  CHECK(fit.fit_residual < 0.05);
}

TEST_CASE("rejects energies at or below the exterior level") {
  Potential v(quartic_spec());
  CHECK_THROWS_AS(scatter(v, C{v.exterior_value()}), DomainError);
  CHECK_THROWS_AS(scatter(v, C{v.exterior_value() - 1.0}), DomainError);
  ScatterProblem prob;
  prob.v = [](double) { return 0.0; };
  CHECK_THROWS_AS(scatter(prob, C{1.0}), DomainError);
}

}  // TEST_SUITE
