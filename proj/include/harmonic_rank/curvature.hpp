#pragma once

#include "harmonic_rank/linalg.hpp"
#include "harmonic_rank/model_spec.hpp"

#include <limits>
#include <memory>
#include <string>

namespace hrank {

/// The Jacobi operator t -> R(t) along one geodesic, in a parallel
/// orthonormal frame of the normal bundle. Implementations are immutable and
/// evaluate() is reentrant.
class CurvatureField {
 public:
  virtual ~CurvatureField() = default;

  virtual int dim_normal() const = 0;
  virtual Matrix evaluate(double t) const = 0;

  /// beta >= 0 with -beta^2 <= R(t) <= 0.
  virtual double bound() const = 0;

  /// Interval on which evaluate() is defined.
  virtual double t_min() const { return -std::numeric_limits<double>::infinity(); }
  virtual double t_max() const { return std::numeric_limits<double>::infinity(); }

  /// True when R(t) does not depend on t.
  virtual bool is_constant() const { return false; }

  /// Describes the direction that selected this geodesic.
  virtual std::string seed_descriptor() const { return ""; }

  bool contains(double t) const { return t >= t_min() && t <= t_max(); }
};

using FieldPtr = std::shared_ptr<const CurvatureField>;

class ConstantField final : public CurvatureField {
 public:
  ConstantField(Matrix r, std::string seed = "");

  int dim_normal() const override { return static_cast<int>(r_.rows()); }
  Matrix evaluate(double) const override { return r_; }
  double bound() const override { return beta_; }
  bool is_constant() const override { return true; }
  std::string seed_descriptor() const override { return seed_; }

 private:
  Matrix r_;
  double beta_;
  std::string seed_;
};

/// Diagonal field diag(kappa_i(t)) conjugated by the rotation exp(twist t J),
/// J rotating consecutive coordinate pairs.
class SyntheticField final : public CurvatureField {
 public:
  SyntheticField(std::vector<SyntheticBlock> blocks, double twist);

  int dim_normal() const override { return static_cast<int>(blocks_.size()); }
  Matrix evaluate(double t) const override;
  double bound() const override { return beta_; }

 private:
  std::vector<SyntheticBlock> blocks_;
  double twist_;
  double beta_;
};

/// R_u(t) = R(t + u): the field seen from the geodesic re-based at c(u).
class ShiftedField final : public CurvatureField {
 public:
  ShiftedField(FieldPtr base, double shift) : base_(std::move(base)), shift_(shift) {}

  int dim_normal() const override { return base_->dim_normal(); }
  Matrix evaluate(double t) const override { return base_->evaluate(t + shift_); }
  double bound() const override { return base_->bound(); }
  double t_min() const override { return base_->t_min() - shift_; }
  double t_max() const override { return base_->t_max() - shift_; }
  bool is_constant() const override { return base_->is_constant(); }
  std::string seed_descriptor() const override;

 private:
  FieldPtr base_;
  double shift_;
};

FieldPtr shift_field(const FieldPtr& base, double shift);

/// Largest |eigenvalue| of symmetric matrix, i.e. the beta^2 of a constant field.
double spectral_radius_sym(const Matrix& r);

}  // namespace hrank
