#include "rsm/eigensolver.hpp"

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "rsm/errors.hpp"
#include "rsm/rng.hpp"

namespace rsm {
namespace {

using C = std::complex<double>;

lapack_complex_double* lp(C* p) {
  return reinterpret_cast<lapack_complex_double*>(p);
}

double norm_estimate(const OperatorMatrix& h) {
  double md = 0.0, mo = 0.0;
  for (const C& v : h.diagonal()) md = std::max(md, std::abs(v));
  for (const C& v : h.off_diagonal()) mo = std::max(mo, std::abs(v));
  return md + 2.0 * mo;
}

double pair_residual(const OperatorMatrix& h, const C& value,
                     const std::vector<C>& v) {
  std::vector<C> hv(v.size());
  h.apply(v.data(), hv.data());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    acc += std::norm(hv[i] - value * v[i]);
  return std::sqrt(acc);
}

}  // namespace

std::vector<EigenPair> eig(const OperatorMatrix& h) {
  const std::size_t n = h.dim();
  if (n == 0) throw DomainError("eig needs dimension >= 1");
  auto finite = [](const C& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  };
  for (const C& v : h.diagonal())
    if (!finite(v)) throw DomainError("eig: non-finite matrix entry");
  for (const C& v : h.off_diagonal())
    if (!finite(v)) throw DomainError("eig: non-finite matrix entry");

  std::vector<C> a = h.dense();
  std::vector<C> w(n), vr(n * n);
  const lapack_int ln = static_cast<lapack_int>(n);
  const lapack_int info =
      LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'V', ln, lp(a.data()), ln,
                    lp(w.data()), nullptr, 1, lp(vr.data()), ln);
  if (info < 0) throw DomainError("eig: invalid argument to the QR driver");
  if (info > 0)
    throw NonConvergence("eig: eigenvalue indices 0.." +
                         std::to_string(info - 1) + " of " +
                         std::to_string(n) + " did not converge");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&w](std::size_t i, std::size_t j) {
    if (w[i].real() != w[j].real()) return w[i].real() < w[j].real();
    return w[i].imag() < w[j].imag();
  });

  std::vector<EigenPair> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    out[k].value = w[i];
    out[k].vector.assign(vr.begin() + static_cast<std::ptrdiff_t>(i * n),
                         vr.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    out[k].residual = pair_residual(h, out[k].value, out[k].vector);
  }
  return out;
}

std::vector<EigenPair> eig_subset_near(const OperatorMatrix& h, C shift,
                                       int count, const SubsetOptions& opt) {
  using Eigen::MatrixXcd;
  const std::size_t n = h.dim();
  if (count < 1) throw DomainError("eig_subset_near needs count >= 1");
  if (static_cast<std::size_t>(count) > n)
    throw DomainError("eig_subset_near: count exceeds the dimension");

  const double scale = norm_estimate(h);
  const lapack_int ln = static_cast<lapack_int>(n);
  const auto& diag = h.diagonal();
  const auto& off = h.off_diagonal();

  // Factor H - shift once; an exactly singular pivot means the shift sits
  // on an eigenvalue to machine precision, so nudge it off.
  std::vector<C> dl, d(n), du, du2(n >= 2 ? n - 2 : 0);
  std::vector<lapack_int> ipiv(n);
  for (int attempt = 0;; ++attempt) {
    dl.assign(off.begin(), off.end());
    du.assign(off.begin(), off.end());
    for (std::size_t i = 0; i < n; ++i) d[i] = diag[i] - shift;
    const lapack_int info =
        LAPACKE_zgttrf(ln, lp(dl.data()), lp(d.data()), lp(du.data()),
                       lp(du2.data()), ipiv.data());
    if (info == 0) break;
    if (info < 0) throw DomainError("eig_subset_near: bad factor argument");
    if (attempt >= 3)
      throw NonConvergence("eig_subset_near: shifted operator stays singular");
    shift += C{0.0, (1e-12 + 1e-14 * scale) * (attempt + 1.0)};
  }

  const int m = std::min<int>(static_cast<int>(n), count + 4);
  SplitMix64 rng(opt.seed);
  MatrixXcd q(n, m);
  for (int j = 0; j < m; ++j)
    for (std::size_t i = 0; i < n; ++i)
      q(static_cast<Eigen::Index>(i), j) =
          C{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  q = Eigen::HouseholderQR<MatrixXcd>(q).householderQ() *
      MatrixXcd::Identity(n, m);

  std::vector<C> rhs(n * static_cast<std::size_t>(m));
  MatrixXcd hq(n, m);
  double worst = 0.0;
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    // One block inverse-iteration sweep.
    for (int j = 0; j < m; ++j)
      for (std::size_t i = 0; i < n; ++i)
        rhs[static_cast<std::size_t>(j) * n + i] =
            q(static_cast<Eigen::Index>(i), j);
    const lapack_int info = LAPACKE_zgttrs(
        LAPACK_COL_MAJOR, 'N', ln, m, lp(dl.data()), lp(d.data()),
        lp(du.data()), lp(du2.data()), ipiv.data(), lp(rhs.data()), ln);
    if (info != 0) throw NonConvergence("eig_subset_near: solve failed");
    for (int j = 0; j < m; ++j)
      for (std::size_t i = 0; i < n; ++i)
        q(static_cast<Eigen::Index>(i), j) =
            rhs[static_cast<std::size_t>(j) * n + i];
    q = Eigen::HouseholderQR<MatrixXcd>(q).householderQ() *
        MatrixXcd::Identity(n, m);

    // Ritz extraction on the subspace.
    for (int j = 0; j < m; ++j) {
      std::vector<C> col(n), out(n);
      for (std::size_t i = 0; i < n; ++i)
        col[i] = q(static_cast<Eigen::Index>(i), j);
      h.apply(col.data(), out.data());
      for (std::size_t i = 0; i < n; ++i)
        hq(static_cast<Eigen::Index>(i), j) = out[i];
    }
    const MatrixXcd b = q.adjoint() * hq;
    Eigen::ComplexEigenSolver<MatrixXcd> ces(b);
    if (ces.info() != Eigen::Success)
      throw NonConvergence("eig_subset_near: projected solve failed");

    std::vector<int> ritz_order(m);
    for (int j = 0; j < m; ++j) ritz_order[j] = j;
    std::sort(ritz_order.begin(), ritz_order.end(), [&](int a2, int b2) {
      return std::abs(ces.eigenvalues()(a2) - shift) <
             std::abs(ces.eigenvalues()(b2) - shift);
    });

    std::vector<EigenPair> out;
    out.reserve(count);
    worst = 0.0;
    for (int k = 0; k < count; ++k) {
      const int j = ritz_order[k];
      EigenPair p;
      p.value = ces.eigenvalues()(j);
      Eigen::VectorXcd y = q * ces.eigenvectors().col(j);
      y /= y.norm();
      p.vector.assign(y.data(), y.data() + n);
      p.residual = pair_residual(h, p.value, p.vector);
      worst = std::max(worst, p.residual);
      out.push_back(std::move(p));
    }
    if (worst <= opt.tol * scale) return out;
  }
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << "eig_subset_near: stalled; best residual " << worst
     << " vs target " << opt.tol * scale;
  throw NonConvergence(os.str());
}

}  // namespace rsm
