#pragma once

#include "harmonic_rank/curvature.hpp"
#include "harmonic_rank/linalg.hpp"

#include <memory>
#include <vector>

namespace hrank {

/// Solvable extension s = v + z + a of an H-type algebra, with the
/// left-invariant metric that makes the standard basis orthonormal:
///   [A, V] = V,  [A, Z] = 2Z,  [V_i, V_j] = 2 sum_k <J_k V_i, V_j> Z_k.
/// With this normalization sectional curvature lies in [-4, 0], the Jacobi
/// operator along A has eigenvalues -1 (on v) and -4 (on z), and q = 1 gives
/// complex hyperbolic space with curvature in [-4, -1]. Coordinates are
/// ordered (v, z, a).
class DamekRicciAlgebra {
 public:
  DamekRicciAlgebra(int p, int q);

  int p() const { return p_; }
  int q() const { return q_; }
  int dim() const { return p_ + q_ + 1; }
  int a_index() const { return p_ + q_; }

  /// Clifford generators J_1..J_q acting on v.
  const std::vector<Matrix>& clifford() const { return j_; }

  Vector bracket(const Vector& x, const Vector& y) const;
  /// Gamma(x) y = nabla_x y for left-invariant fields (Koszul formula).
  Matrix connection(const Vector& x) const;
  /// R(x, y) z = nabla_x nabla_y z - nabla_y nabla_x z - nabla_[x,y] z.
  Vector curvature(const Vector& x, const Vector& y, const Vector& z) const;
  /// The n x n operator w -> R(w, xi) xi.
  Matrix jacobi_operator(const Vector& xi) const;
  double sectional(const Vector& x, const Vector& y) const;

 private:
  int p_, q_;
  std::vector<Matrix> j_;
  std::vector<Matrix> ad_;     // ad_[a] = ad(e_a)
  std::vector<Matrix> gamma_;  // gamma_[a] = Gamma(e_a)
  std::vector<Matrix> jac_;    // jac_[b * n + c] = w -> R(w, e_b) e_c
};

/// Along-geodesic data for the left-invariant geodesic with initial velocity
/// v0: the Euler-Arnold equation xi' = -Gamma(xi) xi and a parallel frame
/// E' = -Gamma(xi) E, tabulated on [-T, T] and interpolated.
class DamekRicciField final : public CurvatureField {
 public:
  DamekRicciField(std::shared_ptr<const DamekRicciAlgebra> algebra, const Vector& v0, double horizon,
                  double node_spacing = 1.0 / 32, double drift_tol = 1e-8);

  int dim_normal() const override { return algebra_->dim() - 1; }
  Matrix evaluate(double t) const override;
  double bound() const override { return 2.0; }
  double t_min() const override { return -horizon_; }
  double t_max() const override { return horizon_; }
  std::string seed_descriptor() const override;

  /// Velocity and frame at t (algebra coordinates).
  Vector velocity(double t) const;
  Matrix frame(double t) const;
  /// Largest orthonormality defect of [xi, E] over the nodes.
  double max_drift() const { return max_drift_; }

 private:
  struct Node {
    Matrix x, dx, ddx;  // columns: xi then E
  };
  void locate(double t, std::size_t& k, double& s) const;
  Matrix interp(double t) const;

  std::shared_ptr<const DamekRicciAlgebra> algebra_;
  Vector v0_;
  double horizon_;
  double h_;
  std::vector<Node> nodes_;  // node k at t = -horizon + k h
  double max_drift_ = 0.0;
};

std::shared_ptr<const DamekRicciField> dr_geodesic_frame(std::shared_ptr<const DamekRicciAlgebra> algebra,
                                                          const Vector& v0, double horizon,
                                                          double drift_tol = 1e-8);

}  // namespace hrank
