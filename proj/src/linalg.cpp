#include "finola/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace finola {

namespace {

template <class Mat>
double inf_norm(const Mat& m) {
  if (m.rows() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

template <class Mat>
double one_norm(const Mat& m) {
  if (m.cols() == 0) return 0.0;
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

template <class Mat>
void require_square(const Mat& m, const char* who) {
  if (m.rows() != m.cols())
    throw ShapeMismatchError(std::string(who) + ": matrix is " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + ", expected square");
}

template <class Mat>
Mat invert_lu(const Mat& m, const char* who) {
  require_square(m, who);
  const double scale = inf_norm(m);
  Eigen::PartialPivLU<Mat> lu(m);
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (scale == 0.0 || min_pivot < 1e-12 * scale)
    throw SingularError(std::string(who) + ": pivot " + std::to_string(min_pivot) +
                        " below 1e-12 * " + std::to_string(scale));
  return lu.solve(Mat::Identity(m.rows(), m.cols()));
}

}  // namespace

RealMatrix invert(const RealMatrix& m) { return invert_lu(m, "invert"); }

ComplexMatrix complex_invert(const ComplexMatrix& m) { return invert_lu(m, "complex_invert"); }

ComplexVector complex_matvec(const ComplexMatrix& m, const ComplexVector& v) {
  if (m.cols() != v.size())
    throw ShapeMismatchError("complex_matvec: " + std::to_string(m.cols()) + " cols vs vector of " +
                             std::to_string(v.size()));
  return m * v;
}

ComplexMatrix complex_matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows())
    throw ShapeMismatchError("complex_matmul: inner dims " + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()));
  return a * b;
}

EigenDecomposition eig_real_nonsymmetric(const RealMatrix& m) {
  require_square(m, "eig_real_nonsymmetric");
  const Eigen::Index n = m.rows();
  if (n > 4096)
    throw ShapeMismatchError("eig_real_nonsymmetric: dimension " + std::to_string(n) +
                             " exceeds the supported 4096");

  // Balancing, Hessenberg reduction and Francis double-shift QR happen inside
  // EigenSolver; its sweep budget is 40 iterations per row, i.e. 40·C total.
  Eigen::EigenSolver<RealMatrix> solver(m, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success)
    throw NoConvergenceError("eig_real_nonsymmetric: QR iteration exceeded 40*C sweeps");

  const ComplexVector raw_values = solver.eigenvalues();
  const ComplexMatrix raw_vectors = solver.eigenvectors();

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const auto va = raw_values[a];
    const auto vb = raw_values[b];
    const double ma = std::abs(va);
    const double mb = std::abs(vb);
    if (ma != mb) return ma > mb;
    if (va.real() != vb.real()) return va.real() > vb.real();
    return va.imag() > vb.imag();
  });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = raw_values[order[static_cast<size_t>(i)]];
    out.vectors.col(i) = raw_vectors.col(order[static_cast<size_t>(i)]);
  }

  const double m_norm = m.norm();
  const double defect = (m * out.vectors - out.vectors * out.values.asDiagonal().toDenseMatrix()).norm();
  out.residual = m_norm > 0.0 ? defect / m_norm : defect;

  Eigen::PartialPivLU<ComplexMatrix> lu(out.vectors);
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (min_pivot <= 0.0 || !std::isfinite(min_pivot)) {
    out.condition = std::numeric_limits<double>::infinity();
  } else {
    const ComplexMatrix vinv = lu.solve(ComplexMatrix::Identity(n, n));
    out.condition = one_norm(out.vectors) * one_norm(vinv);
  }
  if (!(out.condition <= 1e12))
    throw DefectiveError("eig_real_nonsymmetric: eigenvector condition " +
                         std::to_string(out.condition) + " exceeds 1e12");
  return out;
}

}  // namespace finola
