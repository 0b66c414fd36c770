#include "harmonic_rank/curvature.hpp"

#include "harmonic_rank/errors.hpp"

#include <cmath>
#include <sstream>

namespace hrank {

double spectral_radius_sym(const Matrix& r) {
  if (r.size() == 0) return 0.0;
  const Vector ev = sym_eigenvalues(r);
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

ConstantField::ConstantField(Matrix r, std::string seed) : r_(symmetrize(r)), seed_(std::move(seed)) {
  beta_ = std::sqrt(spectral_radius_sym(r_));
}

SyntheticField::SyntheticField(std::vector<SyntheticBlock> blocks, double twist)
    : blocks_(std::move(blocks)), twist_(twist) {
  double m = 0.0;
  for (const auto& b : blocks_) m = std::max(m, b.max_abs());
  beta_ = std::sqrt(m);
}

Matrix SyntheticField::evaluate(double t) const {
  const int m = dim_normal();
  Matrix d = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) d(i, i) = blocks_[static_cast<std::size_t>(i)].value(t);
  if (twist_ == 0.0) return d;
  Matrix q = Matrix::Identity(m, m);
  const double c = std::cos(twist_ * t), s = std::sin(twist_ * t);
  for (int i = 0; i + 1 < m; i += 2) {
    q(i, i) = c;
    q(i, i + 1) = -s;
    q(i + 1, i) = s;
    q(i + 1, i + 1) = c;
  }
  return symmetrize(q * d * q.transpose());
}

std::string ShiftedField::seed_descriptor() const {
  std::ostringstream os;
  os << base_->seed_descriptor() << "@" << shift_;
  return os.str();
}

FieldPtr shift_field(const FieldPtr& base, double shift) {
  if (shift == 0.0) return base;
  return std::make_shared<ShiftedField>(base, shift);
}

}  // namespace hrank
