#pragma once

#include "harmonic_rank/curvature.hpp"
#include "harmonic_rank/linalg.hpp"

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace hrank {

enum class TensorKind { Fundamental_A, Fundamental_D, Boundary_S, Boundary_U, Stable_S, Unstable_U, Custom };
enum class Side { S, U };

std::string to_string(TensorKind kind);

enum class Renormalization {
  /// Divide (Y, Y') by its largest entry once it exceeds a threshold.
  Scalar,
  /// Re-orthonormalize the columns of the stacked (Y; Y') after every step
  /// (QR with positive diagonal), keeping the triangular factors.
  Orthonormal,
};

struct JacobiOptions {
  double tol = 1e-12;
  double max_step = 0.25;
  double min_step = 1e-12;
  Renormalization renorm = Renormalization::Orthonormal;
  double scalar_threshold = 1e8;
};

/// Renormalized solution of Y'' + R Y = 0 on a grid: the true tensor is
/// exp(log_scale[i]) * Y[i], and likewise for Y'.
struct TensorTrajectory {
  TensorKind kind = TensorKind::Custom;
  std::vector<double> grid;
  std::vector<Matrix> Y;
  std::vector<Matrix> Yp;
  std::vector<double> log_scale;
  /// log|det| and sign of the true Y at each sample.
  std::vector<double> log_abs_det;
  std::vector<int> det_sign;
  FieldPtr field;
  JacobiOptions options;

  // Boundary / asymptotic metadata.
  double horizon = std::numeric_limits<double>::quiet_NaN();
  double cauchy_gap = std::numeric_limits<double>::quiet_NaN();
  bool extrapolated = false;
  bool monotone = true;

  std::size_t size() const { return grid.size(); }
  int dim() const { return Y.empty() ? 0 : static_cast<int>(Y.front().rows()); }

  /// True (de-renormalized) values; may overflow for long horizons.
  Matrix value(std::size_t i) const;
  Matrix derivative(std::size_t i) const;
  /// Renormalized second derivative -R(t_i) Y[i].
  Matrix second_derivative(std::size_t i) const;

  /// Index of the grid sample equal to t (within 1e-12), else GridMismatch.
  std::size_t index_of(double t) const;

  struct Local {
    Matrix y, yp;
    double log_scale = 0.0;
  };
  /// State at an arbitrary t inside the grid span, re-integrated from the
  /// nearest sample.
  Local at(double t) const;
};

/// Solution with Y(t_init) = Y0, Y'(t_init) = Yp0 sampled on `grid`, which
/// may extend on both sides of t_init.
TensorTrajectory solve_jacobi(const FieldPtr& field, double t_init, const Matrix& Y0, const Matrix& Yp0,
                              const std::vector<double>& grid, const JacobiOptions& opt = {},
                              TensorKind kind = TensorKind::Custom);

/// Initial condition at grid.front().
TensorTrajectory integrate_jacobi(const FieldPtr& field, const Matrix& Y0, const Matrix& Yp0,
                                  const std::vector<double>& grid, const JacobiOptions& opt = {});

/// A(0) = 0, A'(0) = I.
TensorTrajectory fundamental_A(const FieldPtr& field, const std::vector<double>& grid, const JacobiOptions& opt = {});
/// D(0) = I, D'(0) = 0.
TensorTrajectory fundamental_D(const FieldPtr& field, const std::vector<double>& grid, const JacobiOptions& opt = {});

/// De-renormalized W(Ya, Yb) = Ya'^T Yb - Ya^T Yb' at sample i.
Matrix wronskian(const TensorTrajectory& a, const TensorTrajectory& b, std::size_t i);
/// Same at grid time t.
Matrix wronskian_at(const TensorTrajectory& a, const TensorTrajectory& b, double t);
/// Scale-free self-Wronskian defect |W(Y,Y)| / (|Y| |Y'|) at sample i.
double lagrange_defect(const TensorTrajectory& y, std::size_t i);

/// S_{v,r} (zero at +r) or U_{v,r} (zero at -r), both equal to I at 0,
/// sampled on `grid`. An empty grid means [0, r] (S) or [-r, 0] (U) with
/// spacing 1/16.
TensorTrajectory boundary_tensor(const FieldPtr& field, double r, Side side, std::vector<double> grid = {},
                                 const JacobiOptions& opt = {});

/// S'_{v,r}(0) or U'_{v,r}(0) without storing a trajectory.
Matrix boundary_derivative_at_zero(const FieldPtr& field, double r, Side side, const JacobiOptions& opt = {});

struct AsymptoticOptions {
  double tol = 1e-10;
  double r_start = 4.0;
  double r_max = 256.0;
  double monotone_tol = 1e-9;
  JacobiOptions jacobi;
};

struct AsymptoticLimit {
  Matrix value;  // S'_v(0) or U'_v(0)
  double r = 0.0;
  double gap = 0.0;
  bool extrapolated = false;
  bool monotone = true;
  std::vector<double> radii;
  std::vector<Matrix> sequence;
};

/// Horizon doubling r = r_start, 2 r_start, ... until consecutive values of
/// the boundary derivative at 0 agree within tol. Gaps that halve with each
/// doubling (1/r decay of flat modes) switch to the Richardson-extrapolated
/// sequence 2 X_{2r} - X_r. Throws NoConvergence at r_max.
AsymptoticLimit asymptotic_derivative(const FieldPtr& field, Side side, const AsymptoticOptions& opt = {});

/// S_v or U_v on `grid` (normalized to I at 0), swept from the converged
/// horizon beyond the grid. An empty grid means [-8, 8] with spacing 1/32.
TensorTrajectory asymptotic_tensor(const FieldPtr& field, Side side, std::vector<double> grid = {},
                                   const AsymptoticOptions& opt = {});
/// Same, reusing an already computed limit.
TensorTrajectory asymptotic_tensor(const FieldPtr& field, Side side, const AsymptoticLimit& limit,
                                   std::vector<double> grid, const JacobiOptions& opt = {});

/// V = Y' Y^{-1} at grid time t. Throws SingularTensor.
Matrix riccati_at(const TensorTrajectory& traj, double t);
/// |V' + V^2 + R| at t, with V' from a fourth-order central difference of the
/// re-integrated trajectory.
double riccati_residual(const TensorTrajectory& traj, double t);
/// |Y'' + R Y| / |Y| at t with Y'' from a fourth-order central difference of Y'.
double jacobi_residual(const TensorTrajectory& traj, double t);

/// Integral of (Y^T Y)^{-1} over [a, b] (inside the grid span), by
/// Gauss-Legendre quadrature on re-integrated sub-intervals.
Matrix gram_integral(const TensorTrajectory& traj, double a, double b);

/// Columnar text: t, Y entries row-major, Y' entries row-major, log_scale.
void write_trajectory(std::ostream& os, const TensorTrajectory& traj, const std::string& header = "");

/// Uniform grid a, a+h, ..., b (b included).
std::vector<double> uniform_grid(double a, double b, double h);
/// Sorted union with duplicates (within 1e-12) removed.
std::vector<double> merge_grids(std::vector<double> a, const std::vector<double>& b);

}  // namespace hrank
