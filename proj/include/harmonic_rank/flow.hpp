#pragma once

#include "harmonic_rank/jacobi.hpp"
#include "harmonic_rank/model.hpp"
#include "harmonic_rank/rank.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hrank {

/// Tangent vector to SX at v in the parallel frame of c_v: horizontal part
/// x + lambda v and vertical part y, with x, y normal coordinates.
struct SasakiVector {
  Vector x;
  double lambda = 0.0;
  Vector y;

  double norm() const;
  /// Stacked coordinates [x, lambda, y] of length 2n-1.
  Vector stacked() const;
  static SasakiVector from_stacked(const Vector& s);
};

/// Orthonormal bases (columns in stacked coordinates) of the parallel,
/// central, stable and unstable subspaces at v.
struct SplittingFrame {
  Matrix Ep, Ec, Es, Eu;
  Matrix kernel;      // normal coordinates, m x k
  Matrix complement;  // m x (m - k), eigenvectors of U'-S' above threshold
  int rank = 1;
  int n = 0;
  /// Numerical rank of [Ec Es Eu]; equals 2n-1 for a splitting.
  int stacked_rank = 0;
};

/// Stable/unstable data along one geodesic, reusable for many flow
/// evaluations on [-window, window].
class FlowContext {
 public:
  FlowContext(FieldPtr field, double window, double eps_rank = 1e-6, const AsymptoticOptions& opt = {});

  const FieldPtr& field() const { return field_; }
  const RankReport& rank() const { return rank_; }
  double window() const { return window_; }
  int normal_dim() const { return field_->dim_normal(); }

  /// D phi^t applied to xi; t must lie in [-window, window].
  SasakiVector apply(const SasakiVector& xi, double t) const;
  /// True S_v(t), S_v'(t), U_v(t), U_v'(t).
  void tensors(double t, Matrix& s, Matrix& sp, Matrix& u, Matrix& up) const;

  SplittingFrame splitting() const;

 private:
  FieldPtr field_;
  double window_;
  RankReport rank_;
  Matrix kernel_proj_;
  Matrix gap_pinv_;
  TensorTrajectory s_, u_;
};

SasakiVector flow_derivative(const Model& model, const Direction& seed, const SasakiVector& xi, double t);

SplittingFrame build_splitting(const Model& model, const Direction& seed, double eps_rank = 1e-6);

enum class Subspace { Stable, Unstable, Central };
std::string to_string(Subspace s);

struct ExponentFit {
  /// Slowest rate: min over directions of -slope (stable) or slope
  /// (unstable) of log|D phi^t xi| on [T/2, T]. For the central subspace
  /// the largest slope.
  double alpha = 0.0;
  /// Smallest a >= 1 with |D phi^t xi|/|xi| <= a e^{-alpha t} (stable) or
  /// >= e^{alpha t}/a (unstable) on [0, T]; for central, the envelope constant
  /// c of |D phi^t xi| <= c|xi|(|t|+1) on [-T, T].
  double a = 0.0;
  /// Max least-squares residual of the log-norm fits.
  double residual = 0.0;
  /// Rates along the eigen-directions of U'-S' (stable/unstable only).
  std::vector<double> per_direction;
  std::size_t samples = 0;
  /// Curve of the first sampled direction: t and log|D phi^t xi|.
  std::vector<double> curve_t, curve_log_norm;
};

/// Throws EmptySubspace when the subspace is trivial.
ExponentFit exponent_fit(const FlowContext& ctx, Subspace which, double T, std::size_t n_samples,
                         std::uint64_t seed = 1);
ExponentFit exponent_fit(const Model& model, const Direction& seed, Subspace which, double T, std::size_t n_samples,
                         std::uint64_t rng_seed = 1);

/// Common kernel of R(t_i) on a sampling of [-T, T]; throws
/// DisagreementWithRankKernel when its dimension differs from ker(U'-S').
Matrix parallel_field_detect(const Model& model, const Direction& seed, double T, double tol = 1e-9);

struct LinearGrowthReport {
  double residual = 0.0;
  bool pass = false;
};

/// max_t | |A_v(t)x| - t|x| |; pass when it stays below tol * t.
LinearGrowthReport linear_growth_check(const Model& model, const Direction& seed, const Vector& x,
                                       const std::vector<double>& grid, double tol = 1e-6);

/// Largest principal angle between D phi^t(E) and E at phi^t v, for the
/// stable or unstable subspace, with the target from S'_v(t) S_v(t)^{-1}
/// (resp. U).
double invariance_angle(const FlowContext& ctx, Subspace which, double t);

}  // namespace hrank
