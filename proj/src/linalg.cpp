#include "harmonic_rank/linalg.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

namespace hrank {

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Vector sym_eigenvalues(const Matrix& a) {
  if (a.size() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double log_abs_det(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::PartialPivLU<Matrix> lu(a);
  const Matrix& m = lu.matrixLU();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double d = std::abs(m(i, i));
    if (d == 0.0) return -std::numeric_limits<double>::infinity();
    acc += std::log(d);
  }
  return acc;
}

int det_sign(const Matrix& a) {
  if (a.size() == 0) return 1;
  Eigen::PartialPivLU<Matrix> lu(a);
  const Matrix& m = lu.matrixLU();
  int sign = lu.permutationP().determinant() > 0 ? 1 : -1;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m(i, i) == 0.0) return 0;
    if (m(i, i) < 0.0) sign = -sign;
  }
  return sign;
}

double condition_number(const Matrix& a) {
  if (a.size() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

Matrix right_solve(const Matrix& b, const Matrix& a) {
  return a.transpose().partialPivLu().solve(b.transpose()).transpose();
}

Matrix orthonormal_basis(const Matrix& a, double tol) {
  if (a.cols() == 0 || a.rows() == 0) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  int keep = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * std::max(s(0), 1e-300)) ++keep;
  }
  return svd.matrixU().leftCols(keep);
}

Matrix orthogonal_complement(const Matrix& a) {
  const Eigen::Index n = a.rows();
  if (a.cols() == 0) return Matrix::Identity(n, n);
  const Matrix proj = Matrix::Identity(n, n) - a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(proj));
  // Eigenvalues of the projector are 0 (span a) or 1 (complement).
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (es.eigenvalues()(i) > 0.5) idx.push_back(i);
  }
  Matrix out(n, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(idx[k]);
  return out;
}

double max_principal_angle(const Matrix& a, const Matrix& b) {
  if (a.cols() == 0) return 0.0;
  if (b.cols() == 0) return std::numbers::pi / 2;
  // Residual of projecting span(a) onto span(b); its largest singular value
  // is sin of the largest principal angle.
  const Matrix resid = a - b * (b.transpose() * a);
  Eigen::JacobiSVD<Matrix> svd(resid);
  const double s = std::min(1.0, svd.singularValues()(0));
  return std::asin(s);
}

int numerical_rank(const Matrix& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++r;
  }
  return r;
}

namespace {

GaussRule build_gauss(int n) {
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[static_cast<std::size_t>(i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int points) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(points);
  if (it == cache.end()) it = cache.emplace(points, build_gauss(points)).first;
  return it->second;
}

}  // namespace hrank
