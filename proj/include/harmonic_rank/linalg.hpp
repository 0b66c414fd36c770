#pragma once

#include <Eigen/Dense>

#include <vector>

namespace hrank {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Symmetric part (A + A^T)/2.
Matrix symmetrize(const Matrix& a);

/// Ascending eigenvalues of the symmetric part of `a`.
Vector sym_eigenvalues(const Matrix& a);

/// log|det a| through a pivoted LU; -inf for an exactly singular matrix.
double log_abs_det(const Matrix& a);

/// Sign of det a (+1, -1 or 0).
int det_sign(const Matrix& a);

/// 2-norm condition number estimate from singular values.
double condition_number(const Matrix& a);

/// Solves x * a = b for x (right division, b a^{-1}) through LU of a^T.
Matrix right_solve(const Matrix& b, const Matrix& a);

/// Orthonormal basis (columns) of the column span of `a`, dropping directions
/// whose singular value is below `tol` times the largest one.
Matrix orthonormal_basis(const Matrix& a, double tol = 1e-12);

/// Orthonormal basis of the orthogonal complement of span(columns of `a`) in
/// R^{rows}. `a` is assumed to have orthonormal columns.
Matrix orthogonal_complement(const Matrix& a);

/// Largest principal angle (radians) between span(a) and span(b); both must
/// have orthonormal columns. Measures how far span(a) sticks out of span(b).
double max_principal_angle(const Matrix& a, const Matrix& b);

/// Numerical column rank via SVD with relative threshold.
int numerical_rank(const Matrix& a, double rel_tol = 1e-10);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre(int points);

}  // namespace hrank
