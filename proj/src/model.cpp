#include "harmonic_rank/model.hpp"

#include "harmonic_rank/damek_ricci.hpp"
#include "harmonic_rank/errors.hpp"

#include <cmath>
#include <sstream>

namespace hrank {

Direction::Direction(const Vector& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::InvalidArgument, "direction must be nonzero");
  v_ = v / n;
}

std::string Direction::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < v_.size(); ++i) os << (i ? "," : "") << v_(i);
  os << "]";
  return os.str();
}

struct Model::Impl {
  ModelSpec spec;
  double beta = 0.0;
  std::optional<DistanceOracle> oracle;
  std::shared_ptr<const DamekRicciAlgebra> algebra;
};

namespace {

struct ProductFrame {
  Matrix frame;
  Vector diag;
};

// Product of space forms: R is constant in a frame adapted to the factor
// components a_i of the seed. In-factor complements carry kappa_i a_i^2,
// idle factors and mixing directions carry 0.
ProductFrame product_frame(const ModelSpec& spec, const Vector& x) {
  const int n = spec.dim;
  std::vector<Vector> cols;
  std::vector<double> diag;
  std::vector<Vector> active_dirs;
  std::vector<double> active_len;
  int off = 0;
  for (const auto& f : spec.factors) {
    const Vector xi = x.segment(off, f.dim);
    const double a = xi.norm();
    if (a > 0.0) {
      const Matrix comp = orthogonal_complement(Matrix(xi / a));
      for (Eigen::Index c = 0; c < comp.cols(); ++c) {
        Vector col = Vector::Zero(n);
        col.segment(off, f.dim) = comp.col(c);
        cols.push_back(col);
        diag.push_back(f.curvature * a * a);
      }
      Vector dir = Vector::Zero(n);
      dir.segment(off, f.dim) = xi / a;
      active_dirs.push_back(dir);
      active_len.push_back(a);
    } else {
      for (int c = 0; c < f.dim; ++c) {
        cols.push_back(Vector::Unit(n, off + c));
        diag.push_back(0.0);
      }
    }
    off += f.dim;
  }
  const int k = static_cast<int>(active_dirs.size());
  if (k >= 2) {
    Vector lens(k);
    for (int i = 0; i < k; ++i) lens(i) = active_len[static_cast<std::size_t>(i)];
    const Matrix comp = orthogonal_complement(Matrix(lens / lens.norm()));
    for (Eigen::Index c = 0; c < comp.cols(); ++c) {
      Vector col = Vector::Zero(n);
      for (int i = 0; i < k; ++i) col += comp(i, c) * active_dirs[static_cast<std::size_t>(i)];
      cols.push_back(col);
      diag.push_back(0.0);
    }
  }
  ProductFrame out;
  out.frame.resize(n, static_cast<Eigen::Index>(cols.size()));
  out.diag.resize(static_cast<Eigen::Index>(diag.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.frame.col(static_cast<Eigen::Index>(i)) = cols[i];
    out.diag(static_cast<Eigen::Index>(i)) = diag[i];
  }
  return out;
}

void check_seed(const Model& m, const Direction& seed) {
  if (seed.dim() != m.dim())
    throw Error(ErrorCode::InvalidArgument, "seed dimension " + std::to_string(seed.dim()) +
                                                " does not match model dimension " + std::to_string(m.dim()));
}

}  // namespace

const ModelSpec& Model::spec() const { return impl_->spec; }

int Model::dim() const { return impl_->spec.dim; }

double Model::curvature_bound() const { return impl_->beta; }

const DistanceOracle* Model::distance_oracle() const { return impl_->oracle ? &*impl_->oracle : nullptr; }

std::shared_ptr<const DamekRicciAlgebra> Model::damek_ricci_algebra() const { return impl_->algebra; }

bool Model::seed_independent() const {
  const auto k = impl_->spec.kind;
  return k == ModelKind::SpaceForm || k == ModelKind::TwoBlockSymmetric || k == ModelKind::SyntheticField;
}

Direction Model::default_seed() const {
  if (impl_->spec.kind == ModelKind::DamekRicci) return Direction(Vector::Unit(dim(), impl_->algebra->a_index()));
  return Direction(Vector::Unit(dim(), 0));
}

Direction Model::random_seed(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim());
  double nrm = 0.0;
  while (nrm < 1e-12) {
    for (int i = 0; i < dim(); ++i) v(i) = normal(rng);
    nrm = v.norm();
  }
  return Direction(v);
}

Matrix Model::initial_frame(const Direction& seed) const {
  check_seed(*this, seed);
  if (impl_->spec.kind == ModelKind::Product) return product_frame(impl_->spec, seed.vec()).frame;
  return orthogonal_complement(Matrix(seed.vec()));
}

FieldPtr Model::field(const Direction& seed) const {
  check_seed(*this, seed);
  const ModelSpec& s = impl_->spec;
  const int m = s.dim - 1;
  switch (s.kind) {
    case ModelKind::SpaceForm:
      return std::make_shared<ConstantField>(s.curvature * Matrix::Identity(m, m), seed.describe());
    case ModelKind::TwoBlockSymmetric: {
      Vector d(m);
      for (int i = 0; i < m; ++i) d(i) = i < s.m1 ? -1.0 : -4.0;
      return std::make_shared<ConstantField>(Matrix(d.asDiagonal()), seed.describe());
    }
    case ModelKind::SyntheticField:
      return std::make_shared<SyntheticField>(s.blocks, s.twist);
    case ModelKind::DamekRicci:
      return dr_geodesic_frame(impl_->algebra, seed.vec(), s.horizon);
    case ModelKind::Product: {
      const ProductFrame pf = product_frame(s, seed.vec());
      return std::make_shared<ConstantField>(Matrix(pf.diag.asDiagonal()), seed.describe());
    }
  }
  throw Error(ErrorCode::OracleUnavailable, "unknown model kind");
}

std::optional<double> Model::log_density(double t) const {
  const ModelSpec& s = impl_->spec;
  if (!(t > 0.0)) return std::nullopt;
  switch (s.kind) {
    case ModelKind::SpaceForm: {
      if (s.curvature == 0.0) return (s.dim - 1) * std::log(t);
      const double k = std::sqrt(-s.curvature);
      return (s.dim - 1) * std::log(std::sinh(k * t) / k);
    }
    case ModelKind::TwoBlockSymmetric:
      return s.m1 * std::log(std::sinh(t)) + s.m4 * std::log(0.5 * std::sinh(2.0 * t));
    case ModelKind::DamekRicci:
      return (s.p + s.q) * std::log(std::sinh(t)) + s.q * std::log(std::cosh(t));
    default:
      return std::nullopt;
  }
}

Model build_model(const ModelSpec& spec) {
  validate(spec);
  auto impl = std::make_shared<Model::Impl>();
  impl->spec = spec;
  switch (spec.kind) {
    case ModelKind::SpaceForm:
      impl->beta = std::sqrt(-spec.curvature);
      impl->oracle.emplace(std::vector<FactorGeometry>{{spec.dim, spec.curvature}});
      break;
    case ModelKind::TwoBlockSymmetric:
      impl->beta = spec.m4 > 0 ? 2.0 : (spec.m1 > 0 ? 1.0 : 0.0);
      break;
    case ModelKind::SyntheticField: {
      double m = 0.0;
      for (const auto& b : spec.blocks) m = std::max(m, b.max_abs());
      impl->beta = std::sqrt(m);
      break;
    }
    case ModelKind::DamekRicci:
      impl->algebra = std::make_shared<DamekRicciAlgebra>(spec.p, spec.q);
      impl->beta = 2.0;
      break;
    case ModelKind::Product: {
      std::vector<FactorGeometry> geo;
      for (const auto& f : spec.factors) {
        geo.push_back({f.dim, f.curvature});
        impl->beta = std::max(impl->beta, std::sqrt(-f.curvature));
      }
      impl->oracle.emplace(std::move(geo));
      break;
    }
  }
  Model m;
  m.impl_ = std::move(impl);
  return m;
}

Matrix jacobi_operator(const Model& model, const Direction& seed, double t) {
  if (model.spec().kind == ModelKind::DamekRicci) {
    if (std::abs(t) > model.spec().horizon)
      throw Error(ErrorCode::InvalidArgument, "t outside the configured Damek-Ricci horizon");
    const double horizon = std::min(model.spec().horizon, std::abs(t) + 0.125);
    return dr_geodesic_frame(model.damek_ricci_algebra(), seed.vec(), horizon)->evaluate(t);
  }
  return model.field(seed)->evaluate(t);
}

double distance(const Model& model, const Point& p, const Point& q) {
  const DistanceOracle* o = model.distance_oracle();
  if (!o) throw Error(ErrorCode::OracleUnavailable, to_string(model.spec().kind) + " has no closed-form distance");
  return o->distance(p, q);
}

}  // namespace hrank
