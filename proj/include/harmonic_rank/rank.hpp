#pragma once

#include "harmonic_rank/jacobi.hpp"
#include "harmonic_rank/model.hpp"

#include <string>
#include <vector>

namespace hrank {

/// Volume density f(t) = det A_v(t) along one geodesic.
struct DensityProfile {
  std::vector<double> grid;
  std::vector<double> log_f;
  /// f'/f = tr(A' A^{-1}).
  std::vector<double> logderiv;
  /// Least-squares fit f'/f ~ h + k/t over the final quarter of the grid.
  double h = 0.0;
  double k = 0.0;
  /// Max |f'/f - (h + k/t)| over the fitted range.
  double h_spread = 0.0;
  /// F(t) = f(t) e^{-h t}.
  std::vector<double> F;
};

DensityProfile density_profile(const Model& model, const Direction& seed, const std::vector<double>& grid,
                               const JacobiOptions& opt = {});

struct HarmonicityReport {
  /// max over seeds and t of |log f_s(t) - log f_0(t)| / max(1, |log f_0(t)|).
  double deviation = 0.0;
  bool pass = false;
  std::size_t seeds = 0;
};

HarmonicityReport harmonicity_check(const Model& model, const std::vector<Direction>& seeds,
                                    const std::vector<double>& grid, double tol, const JacobiOptions& opt = {});

struct FConsistencyReport {
  std::vector<double> grid;
  std::vector<double> F;
  /// det(U'_v(0) - S'_{v,t}(0)).
  std::vector<double> det_gap;
  std::vector<double> residual;
  double max_residual = 0.0;
  bool increasing = false;
  /// h = tr U'_v(0).
  double h = 0.0;
};

/// |F(t) det(U'_v(0) - S'_{v,t}(0)) - 1| with F built from h = tr U'_v(0).
/// Throws FlatModel when h vanishes.
FConsistencyReport F_consistency(const Model& model, const Direction& seed, const std::vector<double>& grid,
                                 const AsymptoticOptions& opt = {});

struct MinimalGrowth {
  double lim_F = 0.0;
  double bound = 0.0;
  double gap = 0.0;
  bool equality = false;
};

/// lim F from the tail of the profile (Aitken-accelerated when the tail
/// converges geometrically) against ((n-1)/(2h))^{n-1}.
MinimalGrowth minimal_growth_gap(const DensityProfile& profile, int n, double tol = 1e-4);

struct RankReport {
  /// Times t and sorted eigenvalues of U'_v(0) - S'_{v,t}(0).
  std::vector<double> trace_grid;
  std::vector<Vector> eigen_trace;
  Vector limit_eigs;
  /// Eigenvectors of U'_v(0) - S'_v(0) (columns, ascending eigenvalue), in
  /// the normal frame of the seed.
  Matrix eigenvectors;
  int kernel_dim = 0;
  int rank = 1;
  double beta_positive = 1.0;
  /// Smallest above-threshold eigenvalue (0 if none).
  double rho = 0.0;
  double eigen_gap = 0.0;
  double epsilon = 1e-6;
  /// Above-threshold eigenvalues are nonincreasing along trace_grid.
  bool eigen_monotone = true;
  Matrix Up, Sp;
  double cauchy_gap_s = 0.0, cauchy_gap_u = 0.0;

  Matrix kernel_basis() const { return eigenvectors.leftCols(kernel_dim); }
};

RankReport rank_of(const Model& model, const Direction& seed, double eps_rank = 1e-6,
                   const std::vector<double>& trace_grid = {1, 2, 4, 8, 16}, const AsymptoticOptions& opt = {});
/// Same on an explicit field.
RankReport rank_of_field(const FieldPtr& field, double eps_rank = 1e-6,
                         const std::vector<double>& trace_grid = {1, 2, 4, 8, 16}, const AsymptoticOptions& opt = {});

enum class AnosovVerdict { Anosov, Degenerate };
std::string to_string(AnosovVerdict v);

struct AnosovReport {
  double rho = 0.0;
  AnosovVerdict verdict = AnosovVerdict::Degenerate;
  double beta = 0.0;
  std::vector<double> per_seed_min;
  std::size_t worst_seed = 0;
};

AnosovReport anosov_certificate(const Model& model, const std::vector<Direction>& seeds, double rho_tol = 1e-3,
                                const AsymptoticOptions& opt = {});

enum class GrowthClass { Polynomial, PurelyExponential, ExponentialHigherRank };
std::string to_string(GrowthClass c);

struct GrowthReport {
  GrowthClass cls = GrowthClass::Polynomial;
  double h = 0.0;
  /// Fitted polynomial factor t^k: the total degree for Polynomial, the
  /// degree on top of e^{ht} otherwise.
  double degree_fit = 0.0;
  int degree = 0;
  /// Purely exponential constants over t >= 1.
  double a = 0.0, b = 0.0;
};

/// h below h_tol means Polynomial; otherwise the fitted degree decides
/// between bounded F (|k| < degree_tol) and F ~ t^k.
GrowthReport volume_growth_class(const DensityProfile& profile, double h_tol = 1e-6, double degree_tol = 0.05);

struct ConstrankReport {
  std::vector<double> grid;
  /// values[j][i] = <(U'_v(0) - S'_{v,t_i}(0)) x_j, x_j> for unit kernel x_j.
  std::vector<std::vector<double>> values;
  /// Largest amount by which a bound 1/(alpha^2 t) <= q <= alpha^2/t fails.
  double max_violation = 0.0;
  /// max |q t - 1|.
  double max_deviation = 0.0;
  bool pass = false;
};

/// Throws EmptyKernel when the seed has rank one.
ConstrankReport constrank_bounds_check(const Model& model, const Direction& seed, double alpha,
                                       const std::vector<double>& grid, double tol = 1e-6,
                                       const AsymptoticOptions& opt = {});

/// Least-squares fit y ~ c0 + c1 x.
void linear_fit(const std::vector<double>& x, const std::vector<double>& y, double& c0, double& c1);

}  // namespace hrank
