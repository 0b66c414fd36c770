#include "harmonic_rank/flow.hpp"

#include "harmonic_rank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace hrank {

double SasakiVector::norm() const { return std::sqrt(x.squaredNorm() + lambda * lambda + y.squaredNorm()); }

Vector SasakiVector::stacked() const {
  const Eigen::Index m = x.size();
  Vector s(2 * m + 1);
  s.head(m) = x;
  s(m) = lambda;
  s.tail(m) = y;
  return s;
}

SasakiVector SasakiVector::from_stacked(const Vector& s) {
  if (s.size() % 2 == 0) throw Error(ErrorCode::InvalidArgument, "stacked Sasaki vector must have odd length");
  const Eigen::Index m = (s.size() - 1) / 2;
  return {s.head(m), s(m), s.tail(m)};
}

FlowContext::FlowContext(FieldPtr field, double window, double eps_rank, const AsymptoticOptions& opt)
    : field_(std::move(field)), window_(window) {
  if (!(window > 0.0)) throw Error(ErrorCode::InvalidArgument, "flow window must be positive");
  rank_ = rank_of_field(field_, eps_rank, {}, opt);
  const int m = field_->dim_normal();
  const Matrix k = rank_.kernel_basis();
  kernel_proj_ = k * k.transpose();
  gap_pinv_ = Matrix::Zero(m, m);
  for (int j = rank_.kernel_dim; j < m; ++j) {
    const Vector v = rank_.eigenvectors.col(j);
    gap_pinv_ += v * v.transpose() / rank_.limit_eigs(j);
  }
  const auto grid = uniform_grid(-window, window, 1.0 / 16);
  s_ = asymptotic_tensor(field_, Side::S, grid, opt);
  u_ = asymptotic_tensor(field_, Side::U, grid, opt);
}

void FlowContext::tensors(double t, Matrix& s, Matrix& sp, Matrix& u, Matrix& up) const {
  auto eval = [t](const TensorTrajectory& tr, Matrix& y, Matrix& yp) {
    const auto loc = tr.at(t);
    const double scale = std::exp(loc.log_scale);
    y = scale * loc.y;
    yp = scale * loc.yp;
  };
  eval(s_, s, sp);
  eval(u_, u, up);
}

SasakiVector FlowContext::apply(const SasakiVector& xi, double t) const {
  const int m = normal_dim();
  if (xi.x.size() != m || xi.y.size() != m) throw Error(ErrorCode::InvalidArgument, "Sasaki vector has wrong dimension");
  // Kernel components evolve as parallel Jacobi fields x + t y; the rest
  // splits uniquely into stable and unstable parts, J = S a + U b.
  const Vector xk = kernel_proj_ * xi.x, yk = kernel_proj_ * xi.y;
  const Vector xp = xi.x - xk, yp = xi.y - yk;
  const Vector b = gap_pinv_ * (yp - rank_.Sp * xp);
  const Vector a = xp - b;
  Matrix s, sp, u, up;
  tensors(t, s, sp, u, up);
  SasakiVector out;
  out.x = xk + t * yk + s * a + u * b;
  out.lambda = xi.lambda;
  out.y = yk + sp * a + up * b;
  return out;
}

SplittingFrame FlowContext::splitting() const {
  const int m = normal_dim();
  const int k = rank_.kernel_dim;
  const int d = 2 * m + 1;
  SplittingFrame f;
  f.n = m + 1;
  f.rank = rank_.rank;
  f.kernel = rank_.kernel_basis();
  f.complement = rank_.eigenvectors.rightCols(m - k);

  Matrix ep = Matrix::Zero(d, k + 1);
  ep.topLeftCorner(m, k) = f.kernel;
  ep(m, k) = 1.0;
  Matrix ec = Matrix::Zero(d, 2 * k + 1);
  ec.leftCols(k + 1) = ep;
  ec.bottomRightCorner(m, k) = f.kernel;
  Matrix es = Matrix::Zero(d, m - k), eu = Matrix::Zero(d, m - k);
  es.topRows(m) = f.complement;
  es.bottomRows(m) = rank_.Sp * f.complement;
  eu.topRows(m) = f.complement;
  eu.bottomRows(m) = rank_.Up * f.complement;
  f.Ep = orthonormal_basis(ep);
  f.Ec = orthonormal_basis(ec);
  f.Es = orthonormal_basis(es);
  f.Eu = orthonormal_basis(eu);
  Matrix all(d, f.Ec.cols() + f.Es.cols() + f.Eu.cols());
  all << f.Ec, f.Es, f.Eu;
  f.stacked_rank = numerical_rank(all, 1e-8);
  return f;
}

SasakiVector flow_derivative(const Model& model, const Direction& seed, const SasakiVector& xi, double t) {
  const FlowContext ctx(model.field(seed), std::max(1.0, std::abs(t)));
  return ctx.apply(xi, t);
}

SplittingFrame build_splitting(const Model& model, const Direction& seed, double eps_rank) {
  const FlowContext ctx(model.field(seed), 1.0, eps_rank);
  return ctx.splitting();
}

std::string to_string(Subspace s) {
  switch (s) {
    case Subspace::Stable: return "stable";
    case Subspace::Unstable: return "unstable";
    case Subspace::Central: return "central";
  }
  return "unknown";
}

ExponentFit exponent_fit(const FlowContext& ctx, Subspace which, double T, std::size_t n_samples, std::uint64_t seed) {
  if (!(T > 0.0) || T > ctx.window() + 1e-12) throw Error(ErrorCode::InvalidArgument, "fit horizon outside the flow window");
  const SplittingFrame f = ctx.splitting();
  const Matrix& basis = which == Subspace::Stable ? f.Es : which == Subspace::Unstable ? f.Eu : f.Ec;
  if (basis.cols() == 0) throw Error(ErrorCode::EmptySubspace, to_string(which) + " subspace is trivial");

  // Directions: eigen-directions of U'-S' (hyperbolic parts), then random
  // combinations of the orthonormal basis.
  std::vector<SasakiVector> dirs;
  std::size_t n_eigen = 0;
  if (which != Subspace::Central) {
    const Matrix& v = which == Subspace::Stable ? ctx.rank().Sp : ctx.rank().Up;
    for (Eigen::Index j = 0; j < f.complement.cols(); ++j) {
      SasakiVector xi{f.complement.col(j), 0.0, v * f.complement.col(j)};
      dirs.push_back(xi);
    }
    n_eigen = dirs.size();
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t s = 0; s < n_samples; ++s) {
    Vector c(basis.cols());
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = normal(rng);
    dirs.push_back(SasakiVector::from_stacked(basis * c.normalized()));
  }

  ExponentFit out;
  out.samples = dirs.size();
  const int n_fit = 33, n_env = 65;
  const double sign = which == Subspace::Stable ? -1.0 : 1.0;
  out.alpha = which == Subspace::Central ? -std::numeric_limits<double>::infinity()
                                         : std::numeric_limits<double>::infinity();
  std::vector<double> rates;
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    const double n0 = dirs[d].norm();
    std::vector<double> ts, ls;
    for (int i = 0; i < n_fit; ++i) {
      const double t = T / 2 + (T / 2) * i / (n_fit - 1);
      ts.push_back(t);
      ls.push_back(std::log(ctx.apply(dirs[d], t).norm() / n0));
    }
    double c0, c1;
    linear_fit(ts, ls, c0, c1);
    for (std::size_t i = 0; i < ts.size(); ++i) out.residual = std::max(out.residual, std::abs(ls[i] - c0 - c1 * ts[i]));
    const double rate = sign * c1;
    rates.push_back(rate);
    if (d < n_eigen) out.per_direction.push_back(rate);
    if (which == Subspace::Central)
      out.alpha = std::max(out.alpha, c1);
    else
      out.alpha = std::min(out.alpha, rate);
    if (d == 0) {
      for (int i = 0; i < n_env; ++i) {
        const double t = (which == Subspace::Central ? -T : 0.0) + (which == Subspace::Central ? 2 * T : T) * i / (n_env - 1);
        out.curve_t.push_back(t);
        out.curve_log_norm.push_back(std::log(ctx.apply(dirs[d], t).norm() / n0));
      }
    }
  }

  out.a = which == Subspace::Central ? 0.0 : 1.0;
  for (const auto& xi : dirs) {
    const double n0 = xi.norm();
    for (int i = 0; i < n_env; ++i) {
      if (which == Subspace::Central) {
        const double t = -T + 2 * T * i / (n_env - 1);
        out.a = std::max(out.a, ctx.apply(xi, t).norm() / (n0 * (std::abs(t) + 1.0)));
      } else {
        const double t = T * i / (n_env - 1);
        // One-sided: stable norms stay below a e^{-alpha t}, unstable ones
        // above e^{alpha t} / a.
        const double q = ctx.apply(xi, t).norm() / n0 * std::exp(-sign * out.alpha * t);
        out.a = std::max(out.a, which == Subspace::Stable ? q : 1.0 / q);
      }
    }
  }
  return out;
}

ExponentFit exponent_fit(const Model& model, const Direction& seed, Subspace which, double T, std::size_t n_samples,
                         std::uint64_t rng_seed) {
  const FlowContext ctx(model.field(seed), T);
  return exponent_fit(ctx, which, T, n_samples, rng_seed);
}

Matrix parallel_field_detect(const Model& model, const Direction& seed, double T, double tol) {
  if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "T must be positive");
  const FieldPtr field = model.field(seed);
  const int m = field->dim_normal();
  const auto times = uniform_grid(-T, T, 1.0 / 8);
  Matrix stacked(static_cast<Eigen::Index>(times.size()) * m, m);
  for (std::size_t i = 0; i < times.size(); ++i)
    stacked.middleRows(static_cast<Eigen::Index>(i) * m, m) = field->evaluate(times[i]);
  Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  // Singular values scale like sqrt(#samples) times the curvature size.
  const double thresh = tol * std::sqrt(static_cast<double>(times.size())) * std::max(1.0, field->bound() * field->bound());
  int keep = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++keep;
  const Matrix kernel = svd.matrixV().rightCols(m - keep);

  const RankReport rank = rank_of_field(field, 1e-6, {});
  if (rank.kernel_dim != kernel.cols()) {
    std::ostringstream os;
    os << "common kernel of R(t) on [-" << T << ", " << T << "] has dimension " << kernel.cols()
       << " but ker(U'-S') has dimension " << rank.kernel_dim;
    throw Error(ErrorCode::DisagreementWithRankKernel, os.str());
  }
  return kernel;
}

LinearGrowthReport linear_growth_check(const Model& model, const Direction& seed, const Vector& x,
                                       const std::vector<double>& grid, double tol) {
  const FieldPtr field = model.field(seed);
  if (rank_of_field(field, 1e-6, {}).kernel_dim == 0)
    throw Error(ErrorCode::EmptyKernel, "seed has rank one; no kernel directions");
  if (x.size() != field->dim_normal()) throw Error(ErrorCode::InvalidArgument, "x has wrong dimension");
  const TensorTrajectory a = fundamental_A(field, grid);
  LinearGrowthReport r;
  r.pass = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a.grid[i];
    const double dev = std::abs((a.value(i) * x).norm() - t * x.norm());
    r.residual = std::max(r.residual, dev);
    if (!(dev < tol * std::max(t, 1e-300))) r.pass = false;
  }
  return r;
}

double invariance_angle(const FlowContext& ctx, Subspace which, double t) {
  if (which == Subspace::Central) throw Error(ErrorCode::InvalidArgument, "invariance angle is for stable/unstable");
  const SplittingFrame f = ctx.splitting();
  const Matrix& c = f.complement;
  if (c.cols() == 0) return 0.0;
  const int m = ctx.normal_dim();
  Matrix s, sp, u, up;
  ctx.tensors(t, s, sp, u, up);
  const Matrix& y = which == Subspace::Stable ? s : u;
  const Matrix& yp = which == Subspace::Stable ? sp : up;
  Matrix image = Matrix::Zero(2 * m + 1, c.cols());
  image.topRows(m) = y * c;
  image.bottomRows(m) = yp * c;
  for (Eigen::Index j = 0; j < image.cols(); ++j) image.col(j).normalize();
  Matrix target = Matrix::Zero(2 * m + 1, c.cols());
  target.topRows(m) = c;
  target.bottomRows(m) = right_solve(yp, y) * c;
  return max_principal_angle(orthonormal_basis(image), orthonormal_basis(target));
}

}  // namespace hrank
