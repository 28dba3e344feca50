#pragma once

// Small dense linear-algebra helpers shared across the library.
// Everything targets dimensions N <= 12; no attempt at large-scale efficiency.

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "bracketflow/errors.hpp"

namespace bracketflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix sym(const Matrix& a) { return 0.5 * (a + a.transpose()); }

// Orthonormal basis of the column span, singular values below
// rel_tol * sigma_max treated as zero.
inline Matrix column_span(const Matrix& a, double rel_tol = 1e-8) {
  if (a.cols() == 0) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return Matrix(a.rows(), 0);
  int rank = 0;
  while (rank < s.size() && s(rank) > rel_tol * s(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

// Orthonormal basis of the null space of a (right null space).
inline Matrix null_space(const Matrix& a, double rel_tol = 1e-8) {
  if (a.rows() == 0) return Matrix::Identity(a.cols(), a.cols());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  int rank = 0;
  while (rank < s.size() && smax > 0.0 && s(rank) > rel_tol * smax) ++rank;
  return svd.matrixV().rightCols(a.cols() - rank);
}

// Orthonormal basis of the orthogonal complement of the columns of a in R^n.
inline Matrix orthogonal_complement(const Matrix& a, int n, double rel_tol = 1e-8) {
  if (a.cols() == 0) return Matrix::Identity(n, n);
  return null_space(a.transpose(), rel_tol);
}

// Lower-triangular T with positive diagonal and T^t T = p (p SPD).
// This is the "UL" companion of Cholesky: with J the index-reversal
// permutation, J p J = L L^t gives T = J L^t J.
inline Matrix lower_triangular_gauge(const Matrix& p) {
  const int n = static_cast<int>(p.rows());
  Matrix jpj(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) jpj(i, j) = p(n - 1 - i, n - 1 - j);
  Eigen::LLT<Matrix> llt(jpj);
  if (llt.info() != Eigen::Success)
    throw SingularMatrix("metric not positive definite in triangular gauge");
  Matrix l = llt.matrixL();
  Matrix t(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t(i, j) = l(n - 1 - j, n - 1 - i);
  return t;  // t is lower triangular, t^t t = p
}

// Eigen-decomposition of a symmetric matrix with eigenvalues ascending.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;  // columns; a = vectors * values.asDiagonal() * vectors^t
};

inline SymmetricEigen symmetric_eigen(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(a));
  return {es.eigenvalues(), es.eigenvectors()};
}

// Condition number estimate via SVD.
inline double condition_number(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 0.0)
    return std::numeric_limits<double>::infinity();
  return s(0) / (s(s.size() - 1));
}

}  // namespace bracketflow
