#include "harmonic_rank/damek_ricci.hpp"

#include "harmonic_rank/errors.hpp"
#include "harmonic_rank/hermite.hpp"
#include "harmonic_rank/model_spec.hpp"
#include "harmonic_rank/ode.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace hrank {

namespace {

// Imaginary octonion units e1..e7: e_i e_j = e_k for each oriented triple
// (and its cyclic shifts). {1} and {1,2,3} close up to C and H.
constexpr std::array<std::array<int, 3>, 7> kTriples{{{1, 2, 3}, {1, 4, 5}, {1, 7, 6}, {2, 4, 6}, {2, 5, 7},
                                                      {3, 4, 7}, {3, 6, 5}}};

// Product e_i e_j for imaginary units i != j as (sign, index).
std::pair<int, int> octonion_product(int i, int j) {
  for (const auto& t : kTriples) {
    for (int r = 0; r < 3; ++r) {
      const int a = t[r], b = t[(r + 1) % 3], c = t[(r + 2) % 3];
      if (a == i && b == j) return {1, c};
      if (a == j && b == i) return {-1, c};
    }
  }
  return {0, 0};
}

// Left multiplication by e_k restricted to the first d basis octonions.
Matrix left_mult(int k, int d) {
  Matrix m = Matrix::Zero(d, d);
  for (int col = 0; col < d; ++col) {
    if (col == 0) {
      m(k, 0) = 1.0;
    } else if (col == k) {
      m(0, k) = -1.0;
    } else {
      auto [sign, idx] = octonion_product(k, col);
      if (sign == 0 || idx >= d) throw Error(ErrorCode::InvalidSpec, "Clifford table does not close");
      m(idx, col) = sign;
    }
  }
  return m;
}

}  // namespace

DamekRicciAlgebra::DamekRicciAlgebra(int p, int q) : p_(p), q_(q) {
  const int d = clifford_module_dim(q);
  if (d == 0 || p <= 0 || p % d != 0)
    throw Error(ErrorCode::InvalidSpec, "no H-type structure for (p,q)=(" + std::to_string(p) + "," +
                                            std::to_string(q) + ")");
  for (int k = 1; k <= q; ++k) {
    const Matrix block = left_mult(k, d);
    Matrix jk = Matrix::Zero(p, p);
    for (int b = 0; b < p / d; ++b) jk.block(b * d, b * d, d, d) = block;
    j_.push_back(jk);
  }
  for (int k = 0; k < q; ++k) {
    for (int l = 0; l < q; ++l) {
      const Matrix anti = j_[k] * j_[l] + j_[l] * j_[k];
      const Matrix want = (k == l ? -2.0 : 0.0) * Matrix::Identity(p, p);
      if ((anti - want).norm() > 1e-12) throw Error(ErrorCode::InvalidSpec, "Clifford relations fail");
    }
  }

  const int n = dim();
  const int a = a_index();
  ad_.assign(static_cast<std::size_t>(n), Matrix::Zero(n, n));
  auto set_bracket = [&](int i, int j, const Vector& val) {
    ad_[static_cast<std::size_t>(i)].col(j) = val;
    ad_[static_cast<std::size_t>(j)].col(i) = -val;
  };
  for (int i = 0; i < p; ++i) {
    Vector val = Vector::Zero(n);
    val(i) = 1.0;
    set_bracket(a, i, val);
  }
  for (int k = 0; k < q; ++k) {
    Vector val = Vector::Zero(n);
    val(p + k) = 2.0;
    set_bracket(a, p + k, val);
  }
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      Vector val = Vector::Zero(n);
      // <J_k V_i, V_j> = (J_k)_{j i}
      for (int k = 0; k < q; ++k) val(p + k) = 2.0 * j_[k](j, i);
      set_bracket(i, j, val);
    }
  }

  // Koszul: nabla_x y = 1/2 ([x,y] - ad(y)^T x - ad(x)^T y).
  gamma_.assign(static_cast<std::size_t>(n), Matrix::Zero(n, n));
  for (int xa = 0; xa < n; ++xa) {
    const Matrix& adx = ad_[static_cast<std::size_t>(xa)];
    for (int ya = 0; ya < n; ++ya) {
      const Matrix& ady = ad_[static_cast<std::size_t>(ya)];
      gamma_[static_cast<std::size_t>(xa)].col(ya) =
          0.5 * (adx.col(ya) - ady.row(xa).transpose() - adx.row(ya).transpose());
    }
  }

  jac_.assign(static_cast<std::size_t>(n * n), Matrix::Zero(n, n));
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < n; ++c) {
      Matrix& m = jac_[static_cast<std::size_t>(b * n + c)];
      for (int w = 0; w < n; ++w) {
        Vector ew = Vector::Unit(n, w), eb = Vector::Unit(n, b), ec = Vector::Unit(n, c);
        m.col(w) = curvature(ew, eb, ec);
      }
    }
  }
}

Vector DamekRicciAlgebra::bracket(const Vector& x, const Vector& y) const {
  Vector out = Vector::Zero(dim());
  for (int a = 0; a < dim(); ++a)
    if (x(a) != 0.0) out += x(a) * (ad_[static_cast<std::size_t>(a)] * y);
  return out;
}

Matrix DamekRicciAlgebra::connection(const Vector& x) const {
  Matrix g = Matrix::Zero(dim(), dim());
  for (int a = 0; a < dim(); ++a)
    if (x(a) != 0.0) g += x(a) * gamma_[static_cast<std::size_t>(a)];
  return g;
}

Vector DamekRicciAlgebra::curvature(const Vector& x, const Vector& y, const Vector& z) const {
  const Matrix gx = connection(x), gy = connection(y);
  return gx * (gy * z) - gy * (gx * z) - connection(bracket(x, y)) * z;
}

Matrix DamekRicciAlgebra::jacobi_operator(const Vector& xi) const {
  const int n = dim();
  Matrix k = Matrix::Zero(n, n);
  for (int b = 0; b < n; ++b) {
    if (xi(b) == 0.0) continue;
    for (int c = 0; c < n; ++c) {
      if (xi(c) == 0.0) continue;
      k += (xi(b) * xi(c)) * jac_[static_cast<std::size_t>(b * n + c)];
    }
  }
  return k;
}

double DamekRicciAlgebra::sectional(const Vector& x, const Vector& y) const {
  const double denom = x.squaredNorm() * y.squaredNorm() - std::pow(x.dot(y), 2);
  return curvature(x, y, y).dot(x) / denom;
}

DamekRicciField::DamekRicciField(std::shared_ptr<const DamekRicciAlgebra> algebra, const Vector& v0,
                                 double horizon, double node_spacing, double drift_tol)
    : algebra_(std::move(algebra)), v0_(v0), horizon_(horizon) {
  const int n = algebra_->dim();
  if (v0.size() != n) throw Error(ErrorCode::InvalidArgument, "seed has wrong dimension");
  if (std::abs(v0.norm() - 1.0) > 1e-12) throw Error(ErrorCode::InvalidArgument, "seed must be a unit vector");
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");

  const int half = static_cast<int>(std::ceil(horizon / node_spacing));
  h_ = horizon / half;
  nodes_.resize(static_cast<std::size_t>(2 * half + 1));

  Matrix x0(n, n);
  x0.col(0) = v0;
  x0.rightCols(n - 1) = orthogonal_complement(v0);

  // State = columns of X = [xi, E]; every column obeys y' = -Gamma(xi) y.
  const auto alg = algebra_;
  auto rhs = [alg, n](double, const Vector& y, Vector& dy) {
    Eigen::Map<const Matrix> x(y.data(), n, n);
    const Matrix g = alg->connection(x.col(0));
    dy.resize(y.size());
    Eigen::Map<Matrix>(dy.data(), n, n) = -g * x;
  };
  auto record = [&](int k, const Vector& y) {
    Node& node = nodes_[static_cast<std::size_t>(k)];
    node.x = Eigen::Map<const Matrix>(y.data(), n, n);
    const Matrix g = alg->connection(node.x.col(0));
    node.dx = -g * node.x;
    const Matrix gd = alg->connection(node.dx.col(0));
    node.ddx = -(gd * node.x + g * node.dx);
    const double drift = (node.x.transpose() * node.x - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
    max_drift_ = std::max(max_drift_, drift);
  };

  OdeOptions opt;
  opt.tol = 1e-13;
  opt.h_max = h_;
  for (int dir : {1, -1}) {
    std::vector<double> stops;
    for (int k = 0; k <= half; ++k) stops.push_back(dir * k * h_);
    Vector y = Eigen::Map<const Vector>(x0.data(), n * n);
    dopri5(rhs, 0.0, y, stops, opt, nullptr,
           [&](std::size_t idx, double, const Vector& yy) { record(half + dir * static_cast<int>(idx), yy); });
  }
  if (max_drift_ > drift_tol) {
    std::ostringstream os;
    os << "frame orthonormality drift " << max_drift_ << " exceeds " << drift_tol;
    throw Error(ErrorCode::IntegrationDiverged, os.str());
  }
}

void DamekRicciField::locate(double t, std::size_t& k, double& s) const {
  if (!(t >= -horizon_ - 1e-12 && t <= horizon_ + 1e-12)) {
    std::ostringstream os;
    os << "t=" << t << " outside the tabulated horizon " << horizon_;
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  const double u = (t + horizon_) / h_;
  const std::size_t last = nodes_.size() - 2;
  k = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0, static_cast<double>(last)));
  s = u - static_cast<double>(k);
}

Matrix DamekRicciField::interp(double t) const {
  std::size_t k = 0;
  double s = 0.0;
  locate(t, k, s);
  const Node& a = nodes_[k];
  const Node& b = nodes_[k + 1];
  return hermite5(hermite5_weights(s, h_), a.x, a.dx, a.ddx, b.x, b.dx, b.ddx);
}

Vector DamekRicciField::velocity(double t) const { return interp(t).col(0); }

Matrix DamekRicciField::frame(double t) const { return interp(t).rightCols(algebra_->dim() - 1); }

Matrix DamekRicciField::evaluate(double t) const {
  const Matrix x = interp(t);
  const int n = algebra_->dim();
  const Matrix e = x.rightCols(n - 1);
  return symmetrize(e.transpose() * algebra_->jacobi_operator(x.col(0)) * e);
}

std::string DamekRicciField::seed_descriptor() const {
  std::ostringstream os;
  os.precision(17);
  os << "dr(" << algebra_->p() << "," << algebra_->q() << ") v0=[";
  for (Eigen::Index i = 0; i < v0_.size(); ++i) os << (i ? "," : "") << v0_(i);
  os << "]";
  return os.str();
}

std::shared_ptr<const DamekRicciField> dr_geodesic_frame(std::shared_ptr<const DamekRicciAlgebra> algebra,
                                                          const Vector& v0, double horizon, double drift_tol) {
  return std::make_shared<DamekRicciField>(std::move(algebra), v0, horizon, 1.0 / 32, drift_tol);
}

}  // namespace hrank
