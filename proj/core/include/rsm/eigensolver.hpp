#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "rsm/hamiltonian.hpp"

namespace rsm {

struct EigenPair {
  std::complex<double> value;
  std::vector<std::complex<double>> vector;  // unit 2-norm
  double residual = 0.0;                     // ||H v - value v||_2
};

// Full spectrum with right eigenvectors, sorted by ascending real part
// (ties broken by imaginary part).  Defective matrices are fine: values
// repeat and vectors coalesce, residuals stay meaningful.  Failure to
// converge names the offending indices.
std::vector<EigenPair> eig(const OperatorMatrix& h);

struct SubsetOptions {
  int max_iter = 120;
  // Residual acceptance, relative to an infinity-norm estimate of H.
  double tol = 1e-12;
  std::uint64_t seed = 0x7c3a9d2f11ULL;  // deterministic start basis
};

// The `count` eigenpairs nearest `shift`, found by shifted block inverse
// iteration on the tridiagonal band with Ritz extraction; cost O(dim) per
// iteration.  Ordered by distance from the shift.  Agrees with the full
// decomposition to 1e-8 on converged pairs; throws NonConvergence when the
// subspace stalls (caller may fall back to eig).
std::vector<EigenPair> eig_subset_near(const OperatorMatrix& h,
                                       std::complex<double> shift, int count,
                                       const SubsetOptions& opt = {});

}  // namespace rsm
