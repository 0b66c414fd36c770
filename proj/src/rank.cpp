#include "harmonic_rank/rank.hpp"

#include "harmonic_rank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hrank {

void linear_fit(const std::vector<double>& x, const std::vector<double>& y, double& c0, double& c1) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw Error(ErrorCode::InvalidArgument, "linear fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  c1 = sxx > 0 ? sxy / sxx : 0.0;
  c0 = my - c1 * mx;
}

namespace {

std::size_t tail_start(std::size_t n) { return std::min(n - std::min<std::size_t>(n, 3), (3 * n) / 4); }

Vector sorted_eigs(const Matrix& a) { return sym_eigenvalues(symmetrize(a)); }

double smallest_eig(const Matrix& a) {
  const Vector e = sorted_eigs(a);
  return e.size() ? e(0) : std::numeric_limits<double>::infinity();
}

}  // namespace

DensityProfile density_profile(const Model& model, const Direction& seed, const std::vector<double>& grid,
                               const JacobiOptions& opt) {
  if (grid.size() < 2 || !(grid.front() > 0.0))
    throw Error(ErrorCode::InvalidArgument, "density grid must start at t > 0 and hold two or more samples");
  const TensorTrajectory a = fundamental_A(model.field(seed), grid, opt);
  DensityProfile p;
  p.grid = a.grid;
  for (std::size_t i = 0; i < a.size(); ++i) {
    p.log_f.push_back(a.log_abs_det[i]);
    p.logderiv.push_back(right_solve(a.Yp[i], a.Y[i]).trace());
  }
  const std::size_t s = tail_start(p.grid.size());
  std::vector<double> x, y;
  for (std::size_t i = s; i < p.grid.size(); ++i) {
    x.push_back(1.0 / p.grid[i]);
    y.push_back(p.logderiv[i]);
  }
  linear_fit(x, y, p.h, p.k);
  for (std::size_t i = 0; i < x.size(); ++i) p.h_spread = std::max(p.h_spread, std::abs(y[i] - p.h - p.k * x[i]));
  for (std::size_t i = 0; i < p.grid.size(); ++i) p.F.push_back(std::exp(p.log_f[i] - p.h * p.grid[i]));
  return p;
}

HarmonicityReport harmonicity_check(const Model& model, const std::vector<Direction>& seeds,
                                    const std::vector<double>& grid, double tol, const JacobiOptions& opt) {
  if (seeds.size() < 2) throw Error(ErrorCode::InvalidArgument, "harmonicity check needs two or more seeds");
  HarmonicityReport r;
  r.seeds = seeds.size();
  const DensityProfile ref = density_profile(model, seeds.front(), grid, opt);
  for (std::size_t s = 1; s < seeds.size(); ++s) {
    const DensityProfile p = density_profile(model, seeds[s], grid, opt);
    for (std::size_t i = 0; i < grid.size(); ++i)
      r.deviation = std::max(r.deviation, std::abs(p.log_f[i] - ref.log_f[i]) / std::max(1.0, std::abs(ref.log_f[i])));
  }
  r.pass = r.deviation < tol;
  return r;
}

FConsistencyReport F_consistency(const Model& model, const Direction& seed, const std::vector<double>& grid,
                                 const AsymptoticOptions& opt) {
  const FieldPtr field = model.field(seed);
  const AsymptoticLimit lu = asymptotic_derivative(field, Side::U, opt);
  FConsistencyReport r;
  r.h = lu.value.trace();
  if (!(r.h > 1e-6)) throw Error(ErrorCode::FlatModel, "h vanishes; F(t) det(U'-S'_t) degenerates");
  const TensorTrajectory a = fundamental_A(field, grid, opt.jacobi);
  r.grid = a.grid;
  r.increasing = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a.grid[i];
    if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "F grid must lie in t > 0");
    const Matrix sp = boundary_derivative_at_zero(field, t, Side::S, opt.jacobi);
    const double det = symmetrize(lu.value - sp).determinant();
    const double F = std::exp(a.log_abs_det[i] - r.h * t);
    r.F.push_back(F);
    r.det_gap.push_back(det);
    r.residual.push_back(std::abs(F * det - 1.0));
    r.max_residual = std::max(r.max_residual, r.residual.back());
    if (i > 0 && !(F > r.F[i - 1])) r.increasing = false;
  }
  return r;
}

MinimalGrowth minimal_growth_gap(const DensityProfile& profile, int n, double tol) {
  if (!(profile.h > 1e-6)) throw Error(ErrorCode::FlatModel, "minimal growth bound needs h > 0");
  const std::size_t m = profile.F.size();
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "empty profile");
  MinimalGrowth g;
  g.lim_F = profile.F.back();
  if (m >= 3) {
    const double f1 = profile.F[m - 3], f2 = profile.F[m - 2], f3 = profile.F[m - 1];
    const double d1 = f2 - f1, d2 = f3 - f2;
    const double h1 = profile.grid[m - 2] - profile.grid[m - 3], h2 = profile.grid[m - 1] - profile.grid[m - 2];
    const bool uniform = std::abs(h1 - h2) < 1e-9 * std::max(1.0, h1);
    // Aitken only for a clean geometric tail; otherwise noise dominates.
    if (uniform && std::abs(d2) > 1e-10 * std::abs(f3) && d1 != 0.0) {
      const double ratio = d2 / d1;
      if (ratio > 0.0 && ratio < 0.9) g.lim_F = f3 + d2 * ratio / (1.0 - ratio);
    }
  }
  g.bound = std::pow((n - 1) / (2.0 * profile.h), n - 1);
  g.gap = g.lim_F - g.bound;
  g.equality = std::abs(g.gap) < tol;
  return g;
}

RankReport rank_of(const Model& model, const Direction& seed, double eps_rank, const std::vector<double>& trace_grid,
                   const AsymptoticOptions& opt) {
  return rank_of_field(model.field(seed), eps_rank, trace_grid, opt);
}

RankReport rank_of_field(const FieldPtr& field, double eps_rank, const std::vector<double>& trace_grid,
                         const AsymptoticOptions& opt) {
  const AsymptoticLimit lu = asymptotic_derivative(field, Side::U, opt);
  const AsymptoticLimit ls = asymptotic_derivative(field, Side::S, opt);
  RankReport r;
  r.epsilon = eps_rank;
  r.Up = lu.value;
  r.Sp = ls.value;
  r.cauchy_gap_u = lu.gap;
  r.cauchy_gap_s = ls.gap;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(lu.value - ls.value));
  r.limit_eigs = es.eigenvalues();
  r.eigenvectors = es.eigenvectors();
  const int m = static_cast<int>(r.limit_eigs.size());
  while (r.kernel_dim < m && r.limit_eigs(r.kernel_dim) < eps_rank) ++r.kernel_dim;
  r.rank = r.kernel_dim + 1;
  if (r.kernel_dim == m)
    r.eigen_gap = std::numeric_limits<double>::infinity();
  else if (r.kernel_dim == 0)
    r.eigen_gap = r.limit_eigs(0);
  else
    r.eigen_gap = r.limit_eigs(r.kernel_dim) - r.limit_eigs(r.kernel_dim - 1);
  if (r.eigen_gap < 10.0 * eps_rank) {
    std::ostringstream os;
    os << "eigen-gap " << r.eigen_gap << " below 10 eps_rank around the kernel threshold " << eps_rank;
    throw Error(ErrorCode::AmbiguousKernel, os.str());
  }
  for (int j = r.kernel_dim; j < m; ++j) r.beta_positive *= r.limit_eigs(j);
  r.rho = r.kernel_dim < m ? r.limit_eigs(r.kernel_dim) : 0.0;

  for (double t : trace_grid) {
    r.trace_grid.push_back(t);
    r.eigen_trace.push_back(sorted_eigs(lu.value - boundary_derivative_at_zero(field, t, Side::S, opt.jacobi)));
    const std::size_t i = r.eigen_trace.size() - 1;
    if (i > 0)
      for (int j = r.kernel_dim; j < m; ++j)
        if (r.eigen_trace[i](j) > r.eigen_trace[i - 1](j) + 1e-9) r.eigen_monotone = false;
  }
  return r;
}

std::string to_string(AnosovVerdict v) { return v == AnosovVerdict::Anosov ? "Anosov" : "Degenerate"; }

AnosovReport anosov_certificate(const Model& model, const std::vector<Direction>& seeds, double rho_tol,
                                const AsymptoticOptions& opt) {
  if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "anosov certificate needs a seed");
  AnosovReport r;
  r.beta = model.curvature_bound();
  r.rho = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const FieldPtr field = model.field(seeds[s]);
    const Matrix up = asymptotic_derivative(field, Side::U, opt).value;
    const Matrix sp = asymptotic_derivative(field, Side::S, opt).value;
    const double lmin = smallest_eig(up - sp);
    r.per_seed_min.push_back(lmin);
    if (lmin < r.rho) {
      r.rho = lmin;
      r.worst_seed = s;
    }
  }
  r.verdict = r.rho > rho_tol ? AnosovVerdict::Anosov : AnosovVerdict::Degenerate;
  return r;
}

std::string to_string(GrowthClass c) {
  switch (c) {
    case GrowthClass::Polynomial: return "Polynomial";
    case GrowthClass::PurelyExponential: return "PurelyExponential";
    case GrowthClass::ExponentialHigherRank: return "ExponentialHigherRank";
  }
  return "Unknown";
}

GrowthReport volume_growth_class(const DensityProfile& profile, double h_tol, double degree_tol) {
  GrowthReport g;
  g.h = profile.h;
  g.degree_fit = profile.k;
  g.degree = static_cast<int>(std::lround(profile.k));
  if (std::abs(profile.h) < h_tol) {
    g.cls = GrowthClass::Polynomial;
    return g;
  }
  if (std::abs(profile.k) < degree_tol) {
    g.cls = GrowthClass::PurelyExponential;
    g.degree = 0;
    g.a = std::numeric_limits<double>::infinity();
    g.b = 0.0;
    for (std::size_t i = 0; i < profile.grid.size(); ++i) {
      if (profile.grid[i] < 1.0) continue;
      g.a = std::min(g.a, profile.F[i]);
      g.b = std::max(g.b, profile.F[i]);
    }
    return g;
  }
  g.cls = GrowthClass::ExponentialHigherRank;
  return g;
}

ConstrankReport constrank_bounds_check(const Model& model, const Direction& seed, double alpha,
                                       const std::vector<double>& grid, double tol, const AsymptoticOptions& opt) {
  const RankReport rank = rank_of(model, seed, 1e-6, {}, opt);
  if (rank.kernel_dim == 0) throw Error(ErrorCode::EmptyKernel, "seed has rank one; no kernel directions");
  const FieldPtr field = model.field(seed);
  const Matrix x = rank.kernel_basis();
  ConstrankReport r;
  r.values.assign(static_cast<std::size_t>(x.cols()), {});
  const double a2 = alpha * alpha;
  for (double t : grid) {
    if (t < 1.0) continue;
    r.grid.push_back(t);
    const Matrix gap = symmetrize(rank.Up - boundary_derivative_at_zero(field, t, Side::S, opt.jacobi));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double q = x.col(j).dot(gap * x.col(j));
      r.values[static_cast<std::size_t>(j)].push_back(q);
      // Violations in units of 1/t.
      r.max_violation = std::max({r.max_violation, 1.0 / a2 - q * t, q * t - a2});
      r.max_deviation = std::max(r.max_deviation, std::abs(q * t - 1.0));
    }
  }
  r.pass = r.max_violation <= tol;
  return r;
}

}  // namespace hrank
