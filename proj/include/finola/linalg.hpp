#pragma once

#include "finola/types.hpp"

namespace finola {

/// Eigendecomposition of a real nonsymmetric matrix. `values` are sorted by
/// descending modulus (ties: descending real part, then descending imaginary
/// part) and `vectors` columns follow the same order. `residual` is
/// ‖QV − VΛ‖_F / ‖Q‖_F and `condition` is the 1-norm condition estimate of V.
struct EigenDecomposition {
  ComplexVector values;
  ComplexMatrix vectors;
  double residual = 0.0;
  double condition = 0.0;
};

/// Inverse via LU with partial pivoting. Throws SingularError when any pivot
/// magnitude falls below 1e-12·‖m‖_∞.
RealMatrix invert(const RealMatrix& m);

/// Full complex eigendecomposition of a real square matrix, C ≤ 4096.
/// Throws NoConvergenceError if the QR iteration does not settle within
/// 40·C sweeps and DefectiveError when condition(V) exceeds 1e12.
EigenDecomposition eig_real_nonsymmetric(const RealMatrix& m);

ComplexVector complex_matvec(const ComplexMatrix& m, const ComplexVector& v);
ComplexMatrix complex_matmul(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix complex_invert(const ComplexMatrix& m);

}  // namespace finola
