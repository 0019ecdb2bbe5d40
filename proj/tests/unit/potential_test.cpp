#include "rsm/potential.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

#include "rsm/errors.hpp"

using namespace rsm;

namespace {

double fd1(const Potential& v, double x, double h) {
  return (v(x + h) - v(x - h)) / (2.0 * h);
}

double fd2(const Potential& v, double x, double h) {
  return (v(x + h) - 2.0 * v(x) + v(x - h)) / (h * h);
}

}  // namespace

TEST_SUITE("potential") {

TEST_CASE("window is even, bounded, and half-height at the edge") {
  const double w = 3.0, l = 2.0;
  // center deficit is 2 sigma(-w l)
  CHECK(smoothing_window(0.0, w, l) ==
        doctest::Approx(1.0 - 2.0 / (1.0 + std::exp(w * l))).epsilon(1e-13));
  CHECK(smoothing_window(0.0, 1000.0, l) == 1.0);
  CHECK(std::abs(smoothing_window(l, w, l) - 0.5) < 1e-5);
  CHECK(std::abs(smoothing_window(-l, w, l) - 0.5) < 1e-5);
  double prev = 2.0;
  for (double x : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 5.0}) {
    const double f = smoothing_window(x, w, l);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    CHECK(f < prev);  // strictly decreasing away from the center
    CHECK(smoothing_window(-x, w, l) == doctest::Approx(f).epsilon(1e-13));
    prev = f;
  }
}

TEST_CASE("window tails stay positive down to underflow") {
  // The naive sigma(a)+sigma(b)-1 goes negative out here; the rewritten
  // form must not.
  const double f700 = smoothing_window(700.0, 1.0, 1.0);
  CHECK(f700 > 0.0);
  CHECK(f700 < 1e-290);
  CHECK(smoothing_window(800.0, 1.0, 1.0) == 0.0);
  CHECK(smoothing_window(-800.0, 1.0, 1.0) == 0.0);
}

TEST_CASE("window derivatives match finite differences") {
  const double w = 4.0, l = 1.5;
  for (double x : {-2.3, -1.5, -0.7, 0.0, 0.4, 1.5, 1.9, 3.0}) {
    const auto d = smoothing_window_derivs(x, w, l);
    CHECK(d.f == doctest::Approx(smoothing_window(x, w, l)).epsilon(1e-14));
    const double h = 1e-6;
    const double g1 =
        (smoothing_window(x + h, w, l) - smoothing_window(x - h, w, l)) /
        (2.0 * h);
    const double g2 = (smoothing_window(x + h, w, l) -
                       2.0 * smoothing_window(x, w, l) +
                       smoothing_window(x - h, w, l)) /
                      (h * h);
    CHECK(std::abs(d.f1 - g1) < 1e-7 * (1.0 + std::abs(d.f1)));
    CHECK(std::abs(d.f2 - g2) < 1e-3 * (1.0 + std::abs(d.f2)));
  }
}

TEST_CASE("by-energy truncation reproduces the equivalent by-length spec") {
  PotentialSpec a;
  a.p = 4.0;
  a.truncation = Truncation::by_length(6.0);
  PotentialSpec b = a;
  b.truncation = Truncation::by_energy(1296.0);
  CHECK(effective_length(b) == doctest::Approx(6.0).epsilon(1e-13));
  Potential va(a), vb(b);
  for (double x : {0.0, 1.3, 5.9, 6.0, 6.1, 20.0})
    CHECK(va(x) == doctest::Approx(vb(x)).epsilon(1e-12));
}

TEST_CASE("sharp window: power law inside, plateau or zero outside") {
  PotentialSpec spec;
  spec.p = 4.0;
  spec.truncation = Truncation::by_length(6.0);
  spec.w = 1000.0;
  Potential v(spec);
  CHECK(v.exterior_value() == doctest::Approx(-1296.0));
  CHECK(v(0.0) == 0.0);
  CHECK(v(1.0) == -1.0);
  CHECK(v(2.0) == -16.0);
  CHECK(v(-2.0) == -16.0);
  // At the truncation point interior and exterior coincide, so the value
  // is the plateau no matter how the window splits it.
  CHECK(v(6.0) == doctest::Approx(-1296.0).epsilon(1e-12));
  CHECK(v(6.05) == doctest::Approx(-1296.0).epsilon(1e-12));
  CHECK(v(100.0) == -1296.0);

  spec.exterior = Exterior::zero;
  Potential vz(spec);
  CHECK(vz(2.0) == -16.0);
  CHECK(std::abs(vz(6.05)) < 1e-9);
  CHECK(vz(100.0) == 0.0);
}

TEST_CASE("quadratic perturbation shifts interior and plateau together") {
  PotentialSpec spec;
  spec.p = 4.0;
  spec.truncation = Truncation::by_length(6.0);
  spec.w = 1000.0;
  spec.perturbation = QuadraticSpec{QuadSign::negative, 0.01};
  Potential vn(spec);
  CHECK(vn(2.0) == doctest::Approx(-16.04).epsilon(1e-13));
  CHECK(vn.exterior_value() == doctest::Approx(-1296.36).epsilon(1e-13));
  CHECK(vn(6.0) == doctest::Approx(-1296.36).epsilon(1e-12));
  CHECK(vn(50.0) == doctest::Approx(-1296.36).epsilon(1e-13));

  spec.perturbation = QuadraticSpec{QuadSign::positive, 0.01};
  Potential vp(spec);
  CHECK(vp(2.0) == doctest::Approx(-15.96).epsilon(1e-13));
  CHECK(vp.exterior_value() == doctest::Approx(-1295.64).epsilon(1e-13));
}

TEST_CASE("noise draw is deterministic and in range") {
  NoiseSpec ns;
  ns.kind = NoiseKind::parity_breaking;
  ns.strength = 1e-3;
  ns.seed = 42;
  const auto r1 = NoiseRealization::draw(ns);
  const auto r2 = NoiseRealization::draw(ns);
  REQUIRE(r1.amp.size() == 50);
  REQUIRE(r1.freq.size() == 50);
  REQUIRE(r1.phase.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(r1.amp[i] >= -1.0);
    CHECK(r1.amp[i] <= 1.0);
    CHECK(r1.freq[i] >= 0.1);
    CHECK(r1.freq[i] <= 5.0);
    CHECK(r1.phase[i] >= 0.0);
    CHECK(r1.phase[i] < 6.2831853072);
    CHECK(r1.amp[i] == r2.amp[i]);
    CHECK(r1.freq[i] == r2.freq[i]);
    CHECK(r1.phase[i] == r2.phase[i]);
  }
  ns.seed = 43;
  const auto r3 = NoiseRealization::draw(ns);
  CHECK(r1.amp[0] != r3.amp[0]);

  ns.kind = NoiseKind::symmetric;
  const auto rs = NoiseRealization::draw(ns);
  CHECK(rs.phase.empty());  // phases are only drawn when they matter
}

TEST_CASE("noise parity: symmetric keeps V even, parity-breaking does not") {
  PotentialSpec spec;
  spec.p = 4.0;
  spec.truncation = Truncation::by_length(6.0);
  spec.w = 1000.0;
  NoiseSpec ns;
  ns.kind = NoiseKind::symmetric;
  ns.strength = 1e-2;
  ns.seed = 7;
  spec.perturbation = ns;
  Potential vs(spec);
  CHECK(vs.parity_symmetric());
  double asym = 0.0;
  for (double x = 0.1; x < 6.0; x += 0.37)
    asym = std::max(asym, std::abs(vs(x) - vs(-x)));
  CHECK(asym < 1e-12);

  ns.kind = NoiseKind::parity_breaking;
  spec.perturbation = ns;
  Potential vp(spec);
  CHECK_FALSE(vp.parity_symmetric());
  asym = 0.0;
  for (double x = 0.1; x < 6.0; x += 0.37)
    asym = std::max(asym, std::abs(vp(x) - vp(-x)));
  CHECK(asym > 1e-6);

  ns.strength = 0.0;
  spec.perturbation = ns;
  CHECK(Potential(spec).parity_symmetric());
}

TEST_CASE("derivatives match finite differences across configurations") {
  std::vector<PotentialSpec> specs;
  PotentialSpec base;
  base.truncation = Truncation::by_length(2.0);
  base.w = 10.0;
  base.p = 4.0;
  specs.push_back(base);
  base.p = 2.5;
  specs.push_back(base);
  base.p = 4.0;
  base.exterior = Exterior::zero;
  specs.push_back(base);
  base.exterior = Exterior::plateau;
  NoiseSpec ns;
  ns.kind = NoiseKind::symmetric;
  ns.strength = 1e-2;
  ns.seed = 11;
  base.perturbation = ns;
  specs.push_back(base);
  ns.kind = NoiseKind::parity_breaking;
  base.perturbation = ns;
  specs.push_back(base);
  base.perturbation = QuadraticSpec{QuadSign::negative, 0.05};
  specs.push_back(base);
  base.perturbation = QuadraticSpec{QuadSign::positive, 0.05};
  specs.push_back(base);

  for (const auto& spec : specs) {
    Potential v(spec);
    for (double x : {-1.21, 0.37, 1.0, 1.77, 2.0, 2.31}) {
      const auto d = v.derivatives(x);
      CHECK_FALSE(d.singular);
      const double g1 = fd1(v, x, 1e-6);
      const double g2 = fd2(v, x, 1e-4);
      CHECK(std::abs(d.v1 - g1) < 2e-5 * (1.0 + std::abs(d.v1)));
      CHECK(std::abs(d.v2 - g2) < 2e-3 * (1.0 + std::abs(d.v2)));
    }
  }
}

TEST_CASE("origin: singular flag for p < 2, smooth values otherwise") {
  PotentialSpec spec;
  spec.truncation = Truncation::by_length(2.0);
  spec.w = 50.0;

  spec.p = 1.5;
  CHECK(Potential(spec).derivatives(0.0).singular);
  CHECK_FALSE(Potential(spec).derivatives(0.1).singular);
  spec.p = 1.0;
  CHECK(Potential(spec).derivatives(0.0).singular);
  spec.p = 2.0;
  {
    const auto d = Potential(spec).derivatives(0.0);
    CHECK_FALSE(d.singular);
    CHECK(d.v1 == doctest::Approx(0.0));
    CHECK(d.v2 == doctest::Approx(-2.0).epsilon(1e-10));
  }
  spec.p = 4.0;
  {
    const auto d = Potential(spec).derivatives(0.0);
    CHECK_FALSE(d.singular);
    CHECK(std::abs(d.v1) < 1e-10);
    CHECK(std::abs(d.v2) < 1e-10);
  }
}

TEST_CASE("far exterior is exactly flat; non-finite x is rejected") {
  PotentialSpec spec;
  spec.p = 4.0;
  spec.truncation = Truncation::by_length(6.0);
  spec.w = 1000.0;
  Potential v(spec);
  const auto d = v.derivatives(100.0);
  CHECK(d.v1 == 0.0);
  CHECK(d.v2 == 0.0);
  CHECK(v(1e40) == v.exterior_value());
  CHECK(std::isfinite(v(1e308)));
  CHECK_THROWS_AS(v(std::numeric_limits<double>::infinity()), DomainError);
  CHECK_THROWS_AS(v(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("validation rejects inconsistent specs") {
  PotentialSpec spec;
  spec.p = 0.0;
  CHECK_THROWS_AS(spec.validate(), DomainError);
  spec.p = 4.0;
  spec.w = -1.0;
  CHECK_THROWS_AS(spec.validate(), DomainError);
  spec.w = 1000.0;
  spec.truncation = Truncation::by_length(0.0);
  CHECK_THROWS_AS(spec.validate(), DomainError);
  spec.truncation = Truncation::by_length(6.0);
  NoiseSpec ns;
  ns.freq_min = 0.0;
  spec.perturbation = ns;
  CHECK_THROWS_AS(spec.validate(), DomainError);
  ns.freq_min = 0.1;
  ns.strength = -1.0;
  spec.perturbation = ns;
  CHECK_THROWS_AS(spec.validate(), DomainError);
  ns.strength = 0.0;
  ns.amp_min = 2.0;  // inverted range
  spec.perturbation = ns;
  CHECK_THROWS_AS(spec.validate(), DomainError);
  spec.perturbation = QuadraticSpec{QuadSign::negative, -0.1};
  CHECK_THROWS_AS(spec.validate(), DomainError);
  spec.perturbation = std::monostate{};
  CHECK_NOTHROW(spec.validate());
}

}  // TEST_SUITE
