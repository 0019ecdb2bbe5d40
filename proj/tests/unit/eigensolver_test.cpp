#include "rsm/eigensolver.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "rsm/errors.hpp"
#include "rsm/rng.hpp"

using namespace rsm;
using C = std::complex<double>;

namespace {

OperatorMatrix make_tridiag(std::vector<C> diag, std::vector<C> off) {
  Grid g{-1.0, 1.0, diag.size()};
  return OperatorMatrix(g, std::move(diag), std::move(off), CapSpec{}, 0.0,
                        1.0);
}

OperatorMatrix random_tridiag(SplitMix64& rng, std::size_t n) {
  std::vector<C> diag(n), off(n - 1);
  for (auto& v : diag) v = C{rng.uniform(-1, 1), rng.uniform(-1, 1)};
  for (auto& v : off) v = C{rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return make_tridiag(std::move(diag), std::move(off));
}

// Characteristic polynomial by the trace recurrence (monic, c[0] = 1),
// entirely independent of the production solver.
std::vector<C> char_poly(const std::vector<C>& a, std::size_t n) {
  auto matmul = [n](const std::vector<C>& x, const std::vector<C>& y) {
    std::vector<C> z(n * n, C{0.0});
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
          z[j * n + i] += x[k * n + i] * y[j * n + k];
    return z;
  };
  auto trace = [n](const std::vector<C>& x) {
    C t{0.0};
    for (std::size_t i = 0; i < n; ++i) t += x[i * n + i];
    return t;
  };
  std::vector<C> coeff(n + 1);
  coeff[0] = C{1.0};
  std::vector<C> m(n * n, C{0.0});
  for (std::size_t k = 1; k <= n; ++k) {
    for (std::size_t i = 0; i < n; ++i) m[i * n + i] += coeff[k - 1];
    m = matmul(a, m);
    coeff[k] = -trace(m) / static_cast<double>(k);
  }
  return coeff;
}

// Simultaneous root iteration on a monic polynomial.
std::vector<C> poly_roots(const std::vector<C>& coeff) {
  const std::size_t n = coeff.size() - 1;
  auto eval = [&coeff](C z) {
    C acc = coeff[0];
    for (std::size_t i = 1; i < coeff.size(); ++i) acc = acc * z + coeff[i];
    return acc;
  };
  std::vector<C> z(n);
  const C seed{0.4, 0.9};
  C zk{1.0};
  for (std::size_t i = 0; i < n; ++i) {
    zk *= seed;
    z[i] = zk;
  }
  for (int iter = 0; iter < 500; ++iter) {
    double moved = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      C denom{1.0};
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) denom *= z[i] - z[j];
      const C step = eval(z[i]) / denom;
      z[i] -= step;
      moved = std::max(moved, std::abs(step));
    }
    if (moved < 1e-15) break;
  }
  return z;
}

// Greedy bijective matching distance between two multisets.
double multiset_distance(std::vector<C> a, std::vector<C> b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (const C& x : a) {
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = std::abs(x - b[j]);
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    worst = std::max(worst, bd);
    b.erase(b.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return worst;
}

}  // namespace

TEST_SUITE("eigensolver") {

TEST_CASE("identity matrix: flat spectrum, zero residuals") {
  const auto pairs = eig(make_tridiag(std::vector<C>(5, C{1.0}),
                                      std::vector<C>(4, C{0.0})));
  REQUIRE(pairs.size() == 5);
  for (const auto& p : pairs) {
    CHECK(std::abs(p.value - C{1.0}) < 1e-14);
    CHECK(p.residual < 1e-14);
    CHECK(std::abs(std::sqrt(std::norm(p.vector[0]) + std::norm(p.vector[1]) +
                             std::norm(p.vector[2]) + std::norm(p.vector[3]) +
                             std::norm(p.vector[4])) -
                   1.0) < 1e-12);
  }
}

TEST_CASE("defective complex-symmetric pair is accepted with residuals") {
  // [[i,1],[1,-i]] has a double zero eigenvalue and rank one: a Jordan
  // block in symmetric-tridiagonal form.
  const auto pairs =
      eig(make_tridiag({C{0.0, 1.0}, C{0.0, -1.0}}, {C{1.0}}));
  REQUIRE(pairs.size() == 2);
  for (const auto& p : pairs) {
    CHECK(std::abs(p.value) < 1e-6);  // split scales like sqrt(eps)
    CHECK(p.residual < 1e-12);
  }
}

TEST_CASE("500-case characteristic-polynomial oracle") {
  SplitMix64 rng(20260823);
  for (int case_i = 0; case_i < 500; ++case_i) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.next() % 4);
    const auto h = random_tridiag(rng, n);
    const auto pairs = eig(h);
    std::vector<C> got;
    for (const auto& p : pairs) {
      got.push_back(p.value);
      CHECK(p.residual < 1e-10);
    }
    const auto roots = poly_roots(char_poly(h.dense(), n));
    CHECK(multiset_distance(got, roots) < 1e-8);
  }
}

TEST_CASE("trace identity and conjugation equivariance") {
  SplitMix64 rng(777);
  for (int case_i = 0; case_i < 50; ++case_i) {
    const auto h = random_tridiag(rng, 5);
    const auto pairs = eig(h);
    C sum{0.0}, tr{0.0};
    for (const auto& p : pairs) sum += p.value;
    for (const auto& d : h.diagonal()) tr += d;
    CHECK(std::abs(sum - tr) < 1e-8 * (1.0 + std::abs(tr)));

    std::vector<C> cd, co;
    for (const auto& v : h.diagonal()) cd.push_back(std::conj(v));
    for (const auto& v : h.off_diagonal()) co.push_back(std::conj(v));
    const auto cpairs = eig(make_tridiag(std::move(cd), std::move(co)));
    std::vector<C> a, b;
    for (const auto& p : pairs) a.push_back(std::conj(p.value));
    for (const auto& p : cpairs) b.push_back(p.value);
    CHECK(multiset_distance(std::move(a), std::move(b)) < 1e-10);
  }
}

TEST_CASE("subset solver matches the full decomposition near a shift") {
  SplitMix64 rng(4242);
  const auto h = random_tridiag(rng, 10);
  const auto full = eig(h);

  SUBCASE("single eigenvalue at an exact shift") {
    const C target = full[3].value;
    const auto sub = eig_subset_near(h, target, 1);
    REQUIRE(sub.size() == 1);
    CHECK(std::abs(sub[0].value - target) < 1e-10);
    CHECK(sub[0].residual < 1e-10);
  }

  SUBCASE("two nearest around a midpoint") {
    const C mid = 0.5 * (full[4].value + full[5].value);
    auto sub = eig_subset_near(h, mid, 2);
    REQUIRE(sub.size() == 2);
    std::vector<double> dist;
    for (const auto& f : full) dist.push_back(std::abs(f.value - mid));
    std::sort(dist.begin(), dist.end());
    for (const auto& s : sub) {
      const double d = std::abs(s.value - mid);
      CHECK(d <= dist[1] * (1.0 + 1e-9) + 1e-12);
    }
  }

  SUBCASE("count equal to the dimension reproduces everything") {
    const auto sub = eig_subset_near(h, C{0.0}, 10);
    std::vector<C> a, b;
    for (const auto& p : full) a.push_back(p.value);
    for (const auto& p : sub) b.push_back(p.value);
    CHECK(multiset_distance(std::move(a), std::move(b)) < 1e-8);
  }

  SUBCASE("bad counts are rejected") {
    CHECK_THROWS_AS(eig_subset_near(h, C{0.0}, 0), DomainError);
    CHECK_THROWS_AS(eig_subset_near(h, C{0.0}, 11), DomainError);
  }
}

TEST_CASE("subset solver survives a shift exactly on the spectrum") {
  // Diagonal matrix: the shifted operator is exactly singular until the
  // internal nudge moves it off.
  std::vector<C> diag{C{1.0}, C{2.0}, C{3.0}, C{4.0}};
  const auto h = make_tridiag(std::move(diag), std::vector<C>(3, C{0.0}));
  const auto sub = eig_subset_near(h, C{3.0}, 1);
  REQUIRE(sub.size() == 1);
  CHECK(std::abs(sub[0].value - C{3.0}) < 1e-10);
}

TEST_CASE("non-finite entries are rejected") {
  auto h = make_tridiag({C{1.0}, C{std::nan("")}, C{0.0}},
                        std::vector<C>(2, C{0.0}));
  CHECK_THROWS_AS(eig(h), DomainError);
}

}  // TEST_SUITE
