#include "harmonic_rank/jacobi.hpp"

#include "harmonic_rank/errors.hpp"
#include "harmonic_rank/ode.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace hrank {

std::string to_string(TensorKind kind) {
  switch (kind) {
    case TensorKind::Fundamental_A: return "Fundamental_A";
    case TensorKind::Fundamental_D: return "Fundamental_D";
    case TensorKind::Boundary_S: return "Boundary_S";
    case TensorKind::Boundary_U: return "Boundary_U";
    case TensorKind::Stable_S: return "Stable_S";
    case TensorKind::Unstable_U: return "Unstable_U";
    case TensorKind::Custom: return "Custom";
  }
  return "Unknown";
}

namespace {

constexpr double kGridEps = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Output of one propagation pass. With N_i = [P_i; Q_i] and coordinates G_i,
// the true solution at stop i is X(t_i) = N_i G_i, and G_i = B_i G_{i-1}
// where B_i = exp(b_log[i]) * b[i] (B_0 also absorbs the initial
// normalization).
struct Sweep {
  std::vector<double> t;
  std::vector<Matrix> P, Q;
  std::vector<Matrix> b;
  std::vector<double> b_log;
  std::vector<double> b_logdet;
};

OdeOptions ode_options(const JacobiOptions& opt) {
  OdeOptions o;
  o.tol = opt.tol;
  o.h_max = opt.max_step;
  o.h_min = opt.min_step;
  return o;
}

void check_horizon(const CurvatureField& f, double t) {
  if (!(t >= f.t_min() - kGridEps && t <= f.t_max() + kGridEps)) {
    std::ostringstream os;
    os << "t=" << t << " outside the field horizon [" << f.t_min() << ", " << f.t_max() << "]";
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
}

OdeRhs jacobi_rhs(const FieldPtr& field, int m) {
  return [field, m](double t, const Vector& y, Vector& dy) {
    Eigen::Map<const Matrix> n(y.data(), 2 * m, m);
    dy.resize(y.size());
    Eigen::Map<Matrix> dn(dy.data(), 2 * m, m);
    dn.topRows(m) = n.bottomRows(m);
    dn.bottomRows(m).noalias() = -field->evaluate(t) * n.topRows(m);
  };
}

// Thin QR with nonnegative diagonal in R.
void positive_qr(const Matrix& x, Matrix& q, Matrix& r) {
  const Eigen::Index m = x.cols();
  Eigen::HouseholderQR<Matrix> qr(x);
  q = qr.householderQ() * Matrix::Identity(x.rows(), m);
  r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (r(j, j) < 0.0) {
      r.row(j) *= -1.0;
      q.col(j) *= -1.0;
    }
  }
}

double sum_log_diag(const Matrix& r) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < r.rows(); ++j) {
    if (r(j, j) == 0.0) return kNegInf;
    acc += std::log(std::abs(r(j, j)));
  }
  return acc;
}

Sweep run_sweep(const FieldPtr& field, double t_start, const Matrix& y0, const Matrix& yp0,
                const std::vector<double>& stops, const JacobiOptions& opt) {
  const int m = field->dim_normal();
  if (y0.rows() != m || y0.cols() != m || yp0.rows() != m || yp0.cols() != m)
    throw Error(ErrorCode::InvalidArgument, "initial tensors must be square of the field's normal dimension");
  check_horizon(*field, t_start);
  for (double t : stops) check_horizon(*field, t);

  Matrix x0(2 * m, m);
  x0.topRows(m) = y0;
  x0.bottomRows(m) = yp0;
  if (x0.cwiseAbs().maxCoeff() == 0.0) throw Error(ErrorCode::InvalidArgument, "Y0 and Yp0 are both zero");

  Matrix n0;
  Matrix acc;
  double acc_log = 0.0, acc_logdet = 0.0;
  if (opt.renorm == Renormalization::Orthonormal) {
    Matrix r0;
    positive_qr(x0, n0, r0);
    acc_logdet = sum_log_diag(r0);
    const double c = r0.cwiseAbs().maxCoeff();
    acc = r0 / c;
    acc_log = std::log(c);
  } else {
    const double c = x0.cwiseAbs().maxCoeff();
    n0 = x0 / c;
    acc = Matrix::Identity(m, m);
    acc_log = std::log(c);
    acc_logdet = m * acc_log;
  }

  Sweep sw;
  Vector y = Eigen::Map<const Vector>(n0.data(), 2 * m * m);
  Matrix qf, rf;

  OdeStepHook hook;
  if (opt.renorm == Renormalization::Orthonormal) {
    hook = [&](double, Vector& state) {
      Eigen::Map<Matrix> n(state.data(), 2 * m, m);
      positive_qr(n, qf, rf);
      n = qf;
      acc = rf * acc;
      const double c = acc.cwiseAbs().maxCoeff();
      acc /= c;
      acc_log += std::log(c);
      acc_logdet += sum_log_diag(rf);
    };
  } else {
    hook = [&](double, Vector& state) {
      const double c = state.cwiseAbs().maxCoeff();
      if (c > opt.scalar_threshold) {
        state /= c;
        acc_log += std::log(c);
        acc_logdet += m * std::log(c);
      }
    };
  }
  auto on_stop = [&](std::size_t, double t, const Vector& state) {
    Eigen::Map<const Matrix> n(state.data(), 2 * m, m);
    sw.t.push_back(t);
    sw.P.push_back(n.topRows(m));
    sw.Q.push_back(n.bottomRows(m));
    sw.b.push_back(acc);
    sw.b_log.push_back(acc_log);
    sw.b_logdet.push_back(acc_logdet);
    acc = Matrix::Identity(m, m);
    acc_log = 0.0;
    acc_logdet = 0.0;
  };
  dopri5(jacobi_rhs(field, m), t_start, y, stops, ode_options(opt), hook, on_stop);
  return sw;
}

struct Assembled {
  std::vector<Matrix> Y, Yp;
  std::vector<double> log_scale, log_abs_det;
  std::vector<int> det_sign;
};

void push_sample(Assembled& out, const Matrix& y, const Matrix& yp, double log_scale, double log_det, int sign) {
  out.Y.push_back(y);
  out.Yp.push_back(yp);
  out.log_scale.push_back(log_scale);
  out.log_abs_det.push_back(log_det);
  out.det_sign.push_back(sign);
}

// Rescales m so its largest entry is 1, moving the factor into `log`.
void normalize(Matrix& m, double& log) {
  const double c = m.cwiseAbs().maxCoeff();
  if (c > 0.0 && std::isfinite(c)) {
    m /= c;
    log += std::log(c);
  }
}

// True solution X(t_i) = N_i G_i with G_i accumulated from the start.
Assembled assemble_from_start(const Sweep& sw) {
  const Eigen::Index m = sw.P.empty() ? 0 : sw.P.front().cols();
  Assembled out;
  Matrix g = Matrix::Identity(m, m);
  double g_log = 0.0, g_logdet = 0.0;
  for (std::size_t i = 0; i < sw.t.size(); ++i) {
    g = sw.b[i] * g;
    g_log += sw.b_log[i];
    normalize(g, g_log);
    g_logdet += sw.b_logdet[i];
    const Matrix y = sw.P[i] * g;
    const double ld = g_logdet == kNegInf ? kNegInf : log_abs_det(sw.P[i]) + g_logdet;
    push_sample(out, y, sw.Q[i] * g, g_log, ld, g_logdet == kNegInf ? 0 : det_sign(sw.P[i]));
  }
  return out;
}

// Normalized so that Y(t_anchor) = I: Y(t_i) = P_i G_i G_a^{-1} P_a^{-1}.
Assembled assemble_anchored(const Sweep& sw, std::size_t a) {
  const Eigen::Index m = sw.P.front().cols();
  Eigen::PartialPivLU<Matrix> pa(sw.P[a]);
  const double cond = condition_number(sw.P[a]);
  if (!(cond < 1e13)) {
    std::ostringstream os;
    os << "tensor at the normalization time is singular (condition " << cond << ")";
    throw Error(ErrorCode::SingularFundamental, os.str());
  }
  const Matrix pa_inv = pa.inverse();
  const double pa_logdet = log_abs_det(sw.P[a]);
  const int pa_sign = det_sign(sw.P[a]);

  const std::size_t n = sw.t.size();
  std::vector<Matrix> mm(n);
  std::vector<double> mlog(n, 0.0), mlogdet(n, 0.0);
  mm[a] = Matrix::Identity(m, m);
  for (std::size_t i = a + 1; i < n; ++i) {
    mm[i] = sw.b[i] * mm[i - 1];
    mlog[i] = mlog[i - 1] + sw.b_log[i];
    normalize(mm[i], mlog[i]);
    mlogdet[i] = mlogdet[i - 1] + sw.b_logdet[i];
  }
  for (std::size_t k = a; k-- > 0;) {
    mm[k] = sw.b[k + 1].triangularView<Eigen::Upper>().solve(mm[k + 1]);
    mlog[k] = mlog[k + 1] - sw.b_log[k + 1];
    normalize(mm[k], mlog[k]);
    mlogdet[k] = mlogdet[k + 1] - sw.b_logdet[k + 1];
  }
  Assembled out;
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix core = mm[i] * pa_inv;
    const double ld = log_abs_det(sw.P[i]) + mlogdet[i] - pa_logdet;
    push_sample(out, sw.P[i] * core, sw.Q[i] * core, mlog[i], ld, det_sign(sw.P[i]) * pa_sign);
  }
  return out;
}

bool on_grid(const std::vector<double>& grid, double t) {
  auto it = std::lower_bound(grid.begin(), grid.end(), t - kGridEps);
  return it != grid.end() && std::abs(*it - t) <= kGridEps;
}

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw Error(ErrorCode::InvalidArgument, "grid must be strictly increasing");
}

// Appends the sweep samples whose times lie on `grid` to the trajectory, in
// increasing time order.
void collect(TensorTrajectory& traj, const Sweep& sw, const Assembled& as, const std::vector<double>& grid) {
  std::vector<std::size_t> idx(sw.t.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return sw.t[x] < sw.t[y]; });
  for (std::size_t i : idx) {
    if (!on_grid(grid, sw.t[i])) continue;
    traj.grid.push_back(sw.t[i]);
    traj.Y.push_back(as.Y[i]);
    traj.Yp.push_back(as.Yp[i]);
    traj.log_scale.push_back(as.log_scale[i]);
    traj.log_abs_det.push_back(as.log_abs_det[i]);
    traj.det_sign.push_back(as.det_sign[i]);
  }
}

void sort_trajectory(TensorTrajectory& traj) {
  std::vector<std::size_t> idx(traj.grid.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return traj.grid[x] < traj.grid[y]; });
  TensorTrajectory sorted = traj;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    sorted.grid[k] = traj.grid[idx[k]];
    sorted.Y[k] = traj.Y[idx[k]];
    sorted.Yp[k] = traj.Yp[idx[k]];
    sorted.log_scale[k] = traj.log_scale[idx[k]];
    sorted.log_abs_det[k] = traj.log_abs_det[idx[k]];
    sorted.det_sign[k] = traj.det_sign[idx[k]];
  }
  traj = std::move(sorted);
}

// Short unrenormalized integration of (y, yp) from t0 through increasing or
// decreasing stop times.
void local_sweep(const FieldPtr& field, double t0, const Matrix& y, const Matrix& yp, const std::vector<double>& stops,
                 const JacobiOptions& opt, const std::function<void(std::size_t, const Matrix&, const Matrix&)>& cb) {
  const int m = static_cast<int>(y.rows());
  Matrix x(2 * m, m);
  x.topRows(m) = y;
  x.bottomRows(m) = yp;
  Vector state = Eigen::Map<const Vector>(x.data(), 2 * m * m);
  dopri5(jacobi_rhs(field, m), t0, state, stops, ode_options(opt), nullptr,
         [&](std::size_t idx, double, const Vector& s) {
           Eigen::Map<const Matrix> n(s.data(), 2 * m, m);
           cb(idx, n.topRows(m), n.bottomRows(m));
         });
}

}  // namespace

Matrix TensorTrajectory::value(std::size_t i) const { return std::exp(log_scale[i]) * Y[i]; }

Matrix TensorTrajectory::derivative(std::size_t i) const { return std::exp(log_scale[i]) * Yp[i]; }

Matrix TensorTrajectory::second_derivative(std::size_t i) const { return -field->evaluate(grid[i]) * Y[i]; }

std::size_t TensorTrajectory::index_of(double t) const {
  auto it = std::lower_bound(grid.begin(), grid.end(), t - kGridEps);
  if (it == grid.end() || std::abs(*it - t) > kGridEps) {
    std::ostringstream os;
    os << "t=" << t << " is not a grid sample";
    throw Error(ErrorCode::GridMismatch, os.str());
  }
  return static_cast<std::size_t>(it - grid.begin());
}

TensorTrajectory::Local TensorTrajectory::at(double t) const {
  if (grid.empty() || t < grid.front() - kGridEps || t > grid.back() + kGridEps) {
    std::ostringstream os;
    os << "t=" << t << " outside the trajectory span";
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  auto it = std::lower_bound(grid.begin(), grid.end(), t);
  std::size_t i = static_cast<std::size_t>(it - grid.begin());
  if (i == grid.size() || (i > 0 && std::abs(grid[i - 1] - t) < std::abs(grid[i] - t))) --i;
  Local out;
  out.log_scale = log_scale[i];
  if (std::abs(grid[i] - t) <= kGridEps) {
    out.y = Y[i];
    out.yp = Yp[i];
    return out;
  }
  local_sweep(field, grid[i], Y[i], Yp[i], {t}, options, [&](std::size_t, const Matrix& y, const Matrix& yp) {
    out.y = y;
    out.yp = yp;
  });
  return out;
}

TensorTrajectory solve_jacobi(const FieldPtr& field, double t_init, const Matrix& Y0, const Matrix& Yp0,
                              const std::vector<double>& grid, const JacobiOptions& opt, TensorKind kind) {
  check_grid(grid);
  TensorTrajectory traj;
  traj.kind = kind;
  traj.field = field;
  traj.options = opt;
  std::vector<double> fwd, bwd;
  for (double t : grid) (t >= t_init ? fwd : bwd).push_back(t);
  std::reverse(bwd.begin(), bwd.end());
  for (const auto* stops : {&bwd, &fwd}) {
    if (stops->empty()) continue;
    const Sweep sw = run_sweep(field, t_init, Y0, Yp0, *stops, opt);
    collect(traj, sw, assemble_from_start(sw), grid);
  }
  sort_trajectory(traj);
  return traj;
}

TensorTrajectory integrate_jacobi(const FieldPtr& field, const Matrix& Y0, const Matrix& Yp0,
                                  const std::vector<double>& grid, const JacobiOptions& opt) {
  check_grid(grid);
  return solve_jacobi(field, grid.front(), Y0, Yp0, grid, opt, TensorKind::Custom);
}

TensorTrajectory fundamental_A(const FieldPtr& field, const std::vector<double>& grid, const JacobiOptions& opt) {
  const int m = field->dim_normal();
  return solve_jacobi(field, 0.0, Matrix::Zero(m, m), Matrix::Identity(m, m), grid, opt, TensorKind::Fundamental_A);
}

TensorTrajectory fundamental_D(const FieldPtr& field, const std::vector<double>& grid, const JacobiOptions& opt) {
  const int m = field->dim_normal();
  return solve_jacobi(field, 0.0, Matrix::Identity(m, m), Matrix::Zero(m, m), grid, opt, TensorKind::Fundamental_D);
}

Matrix wronskian(const TensorTrajectory& a, const TensorTrajectory& b, std::size_t i) {
  if (a.grid.size() != b.grid.size()) throw Error(ErrorCode::GridMismatch, "trajectories have different grids");
  for (std::size_t k = 0; k < a.grid.size(); ++k)
    if (std::abs(a.grid[k] - b.grid[k]) > kGridEps)
      throw Error(ErrorCode::GridMismatch, "trajectories have different grids");
  if (i >= a.grid.size()) throw Error(ErrorCode::GridMismatch, "sample index out of range");
  const Matrix w = a.Yp[i].transpose() * b.Y[i] - a.Y[i].transpose() * b.Yp[i];
  return std::exp(a.log_scale[i] + b.log_scale[i]) * w;
}

Matrix wronskian_at(const TensorTrajectory& a, const TensorTrajectory& b, double t) {
  const std::size_t i = a.index_of(t);
  if (b.index_of(t) != i) throw Error(ErrorCode::GridMismatch, "trajectories have different grids");
  return wronskian(a, b, i);
}

double lagrange_defect(const TensorTrajectory& y, std::size_t i) {
  const Matrix w = y.Yp[i].transpose() * y.Y[i] - y.Y[i].transpose() * y.Yp[i];
  const double scale = y.Y[i].norm() * y.Yp[i].norm();
  return scale == 0.0 ? w.norm() : w.norm() / scale;
}

TensorTrajectory boundary_tensor(const FieldPtr& field, double r, Side side, std::vector<double> grid,
                                 const JacobiOptions& opt) {
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "boundary horizon must be positive");
  if (grid.empty()) grid = side == Side::S ? uniform_grid(0.0, r, 1.0 / 16) : uniform_grid(-r, 0.0, 1.0 / 16);
  check_grid(grid);
  const int m = field->dim_normal();
  std::vector<double> stops = merge_grids(grid, {0.0});
  double t_start = 0.0;
  Matrix yp0;
  if (side == Side::S) {
    if (stops.back() > r + kGridEps) throw Error(ErrorCode::InvalidArgument, "grid extends beyond the boundary r");
    std::reverse(stops.begin(), stops.end());
    t_start = r;
    yp0 = -Matrix::Identity(m, m);
  } else {
    if (stops.front() < -r - kGridEps) throw Error(ErrorCode::InvalidArgument, "grid extends beyond the boundary -r");
    t_start = -r;
    yp0 = Matrix::Identity(m, m);
  }
  // Snap a boundary sample exactly onto the start time.
  for (double& t : stops)
    if (std::abs(t - t_start) <= kGridEps) t = t_start;
  const Sweep sw = run_sweep(field, t_start, Matrix::Zero(m, m), yp0, stops, opt);
  std::size_t anchor = 0;
  for (std::size_t i = 0; i < sw.t.size(); ++i)
    if (std::abs(sw.t[i]) <= kGridEps) anchor = i;

  TensorTrajectory traj;
  traj.kind = side == Side::S ? TensorKind::Boundary_S : TensorKind::Boundary_U;
  traj.field = field;
  traj.options = opt;
  traj.horizon = r;
  collect(traj, sw, assemble_anchored(sw, anchor), grid);
  return traj;
}

Matrix boundary_derivative_at_zero(const FieldPtr& field, double r, Side side, const JacobiOptions& opt) {
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "boundary horizon must be positive");
  const int m = field->dim_normal();
  const double t_start = side == Side::S ? r : -r;
  const Matrix yp0 = (side == Side::S ? -1.0 : 1.0) * Matrix::Identity(m, m);
  const Sweep sw = run_sweep(field, t_start, Matrix::Zero(m, m), yp0, {0.0}, opt);
  if (!(condition_number(sw.P[0]) < 1e13)) throw Error(ErrorCode::SingularFundamental, "boundary tensor singular at 0");
  return right_solve(sw.Q[0], sw.P[0]);
}

AsymptoticLimit asymptotic_derivative(const FieldPtr& field, Side side, const AsymptoticOptions& opt) {
  const double cap = side == Side::S ? field->t_max() : -field->t_min();
  const double r_max = std::min(opt.r_max, cap);
  if (opt.r_start > r_max) throw Error(ErrorCode::NoConvergence, "field horizon shorter than the first doubling step");

  AsymptoticLimit out;
  auto spectral = [](const Matrix& a) { return a.size() == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(a).singularValues()(0); };
  std::vector<double> gaps;
  for (double r = opt.r_start; r <= r_max * (1 + 1e-12); r *= 2.0) {
    out.radii.push_back(r);
    out.sequence.push_back(symmetrize(boundary_derivative_at_zero(field, r, side, opt.jacobi)));
    const std::size_t k = out.sequence.size() - 1;
    if (k == 0) continue;
    const Matrix diff = out.sequence[k] - out.sequence[k - 1];
    // S'_{v,r}(0) increases and U'_{v,r}(0) decreases with r.
    const Vector ev = sym_eigenvalues(diff);
    if (ev.size() > 0) {
      if (side == Side::S && ev(0) < -opt.monotone_tol) out.monotone = false;
      if (side == Side::U && ev(ev.size() - 1) > opt.monotone_tol) out.monotone = false;
    }
    gaps.push_back(spectral(diff));
    out.gap = gaps.back();
    if (gaps.back() < opt.tol) {
      out.value = out.sequence[k];
      out.r = r;
      return out;
    }
    if (k >= 2) {
      const double ratio = gaps[k - 1] / gaps[k - 2];
      if (ratio > 0.4 && ratio < 0.6) {
        const Matrix e_k = 2.0 * out.sequence[k] - out.sequence[k - 1];
        const Matrix e_prev = 2.0 * out.sequence[k - 1] - out.sequence[k - 2];
        const double egap = spectral(e_k - e_prev);
        if (egap < opt.tol) {
          out.value = e_k;
          out.r = out.radii[k - 1];
          out.gap = egap;
          out.extrapolated = true;
          return out;
        }
      }
    }
  }
  std::ostringstream os;
  os << "Cauchy gap " << out.gap << " above tol " << opt.tol << " at r=" << (out.radii.empty() ? 0.0 : out.radii.back());
  throw Error(ErrorCode::NoConvergence, os.str());
}

TensorTrajectory asymptotic_tensor(const FieldPtr& field, Side side, const AsymptoticLimit& limit,
                                   std::vector<double> grid, const JacobiOptions& opt) {
  if (grid.empty()) grid = uniform_grid(-8.0, 8.0, 1.0 / 32);
  check_grid(grid);
  const double reach = side == Side::S ? std::max(grid.back(), 0.0) : std::max(-grid.front(), 0.0);
  const double r1 = reach + limit.r;
  TensorTrajectory traj = boundary_tensor(field, r1, side, grid, opt);
  if (limit.extrapolated) {
    // Richardson in 1/R over the boundary distance R; exact for modes that
    // behave like 1 - t/R.
    const TensorTrajectory t2 = boundary_tensor(field, 2.0 * r1, side, grid, opt);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const double l = std::max(traj.log_scale[i], t2.log_scale[i]);
      const double w1 = std::exp(traj.log_scale[i] - l), w2 = std::exp(t2.log_scale[i] - l);
      traj.Y[i] = 2.0 * w2 * t2.Y[i] - w1 * traj.Y[i];
      traj.Yp[i] = 2.0 * w2 * t2.Yp[i] - w1 * traj.Yp[i];
      traj.log_scale[i] = l;
      normalize(traj.Y[i], traj.log_scale[i]);
      traj.Yp[i] *= std::exp(l - traj.log_scale[i]);
      const double ld = log_abs_det(traj.Y[i]);
      traj.log_abs_det[i] = ld == kNegInf ? kNegInf : ld + traj.dim() * traj.log_scale[i];
      traj.det_sign[i] = det_sign(traj.Y[i]);
    }
  }
  traj.kind = side == Side::S ? TensorKind::Stable_S : TensorKind::Unstable_U;
  traj.horizon = limit.r;
  traj.cauchy_gap = limit.gap;
  traj.extrapolated = limit.extrapolated;
  traj.monotone = limit.monotone;
  return traj;
}

TensorTrajectory asymptotic_tensor(const FieldPtr& field, Side side, std::vector<double> grid,
                                   const AsymptoticOptions& opt) {
  const AsymptoticLimit limit = asymptotic_derivative(field, side, opt);
  return asymptotic_tensor(field, side, limit, std::move(grid), opt.jacobi);
}

namespace {

Matrix riccati_of(const Matrix& y, const Matrix& yp) {
  const double cond = condition_number(y);
  if (!(cond < 1e13)) {
    std::ostringstream os;
    os << "tensor singular (condition " << cond << ")";
    throw Error(ErrorCode::SingularTensor, os.str());
  }
  return right_solve(yp, y);
}

}  // namespace

Matrix riccati_at(const TensorTrajectory& traj, double t) {
  const std::size_t i = traj.index_of(t);
  return riccati_of(traj.Y[i], traj.Yp[i]);
}

double riccati_residual(const TensorTrajectory& traj, double t) {
  const double d = 5e-3;
  auto v = [&](double s) {
    const auto loc = traj.at(s);
    return riccati_of(loc.y, loc.yp);
  };
  const Matrix v0 = v(t);
  const Matrix dv = (-v(t + 2 * d) + 8.0 * v(t + d) - 8.0 * v(t - d) + v(t - 2 * d)) / (12.0 * d);
  return (dv + v0 * v0 + traj.field->evaluate(t)).norm();
}

double jacobi_residual(const TensorTrajectory& traj, double t) {
  const double d = 5e-3;
  const auto c = traj.at(t);
  auto yp = [&](double s) {
    const auto loc = traj.at(s);
    return Matrix(std::exp(loc.log_scale - c.log_scale) * loc.yp);
  };
  const Matrix ypp = (-yp(t + 2 * d) + 8.0 * yp(t + d) - 8.0 * yp(t - d) + yp(t - 2 * d)) / (12.0 * d);
  const double scale = std::max(c.y.norm(), 1e-300);
  return (ypp + traj.field->evaluate(t) * c.y).norm() / scale;
}

Matrix gram_integral(const TensorTrajectory& traj, double a, double b) {
  if (a > b) return -gram_integral(traj, b, a);
  const int m = traj.dim();
  Matrix total = Matrix::Zero(m, m);
  if (traj.grid.empty() || a < traj.grid.front() - kGridEps || b > traj.grid.back() + kGridEps)
    throw Error(ErrorCode::InvalidArgument, "integration range outside the trajectory span");
  if (a == b) return total;
  const GaussRule& gl = gauss_legendre(10);
  for (std::size_t i = 0; i + 1 < traj.grid.size(); ++i) {
    const double lo = std::max(a, traj.grid[i]);
    const double hi = std::min(b, traj.grid[i + 1]);
    if (!(hi > lo)) continue;
    const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.5)));
    const double width = (hi - lo) / pieces;
    std::vector<double> nodes, weights;
    for (int p = 0; p < pieces; ++p) {
      const double mid = lo + (p + 0.5) * width;
      for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
        nodes.push_back(mid + 0.5 * width * gl.nodes[k]);
        weights.push_back(0.5 * width * gl.weights[k]);
      }
    }
    std::vector<std::size_t> order(nodes.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return nodes[x] < nodes[y]; });
    std::vector<double> stops;
    for (std::size_t k : order) stops.push_back(nodes[k]);
    const double scale = std::exp(-2.0 * traj.log_scale[i]);
    local_sweep(traj.field, traj.grid[i], traj.Y[i], traj.Yp[i], stops, traj.options,
                [&](std::size_t idx, const Matrix& y, const Matrix&) {
                  const Matrix g = y.transpose() * y;
                  Eigen::LLT<Matrix> llt(g);
                  if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularTensor, "Y^T Y not positive definite");
                  total += (weights[order[idx]] * scale) * llt.solve(Matrix::Identity(m, m));
                });
  }
  return symmetrize(total);
}

void write_trajectory(std::ostream& os, const TensorTrajectory& traj, const std::string& header) {
  if (!header.empty()) {
    std::istringstream lines(header);
    std::string line;
    while (std::getline(lines, line)) os << "# " << line << "\n";
  }
  os << "# kind " << to_string(traj.kind) << "\n";
  const int m = traj.dim();
  os << "t";
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) os << "\tY_" << r << c;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) os << "\tYp_" << r << c;
  os << "\tlog_scale\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    os << traj.grid[i];
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) os << "\t" << traj.Y[i](r, c);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) os << "\t" << traj.Yp[i](r, c);
    os << "\t" << traj.log_scale[i] << "\n";
  }
}

std::vector<double> uniform_grid(double a, double b, double h) {
  if (!(b >= a) || !(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "bad uniform grid");
  const auto n = static_cast<long>(std::max(1.0, std::round((b - a) / h)));
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(n) + 1);
  if (a == b) return {a};
  for (long k = 0; k <= n; ++k) g.push_back(k == n ? b : a + (b - a) * static_cast<double>(k) / static_cast<double>(n));
  return g;
}

std::vector<double> merge_grids(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  std::vector<double> out;
  for (double t : a)
    if (out.empty() || t - out.back() > kGridEps) out.push_back(t);
  return out;
}

}  // namespace hrank
