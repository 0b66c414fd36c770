#pragma once

#include "harmonic_rank/curvature.hpp"
#include "harmonic_rank/distance.hpp"
#include "harmonic_rank/model_spec.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hrank {

class DamekRicciAlgebra;

/// A unit vector in T_pX (ambient coordinates of the model) selecting a
/// geodesic.
class Direction {
 public:
  explicit Direction(const Vector& v);
  const Vector& vec() const { return v_; }
  int dim() const { return static_cast<int>(v_.size()); }
  std::string describe() const;

 private:
  Vector v_;
};

/// Immutable bundle built from a ModelSpec; cheap to copy and safe to share
/// across threads.
class Model {
 public:
  const ModelSpec& spec() const;
  int dim() const;
  /// beta with -beta^2 <= R(t).
  double curvature_bound() const;

  /// The Jacobi operator field along c_seed. Damek-Ricci fields are tabulated
  /// on the spec's horizon when this is called.
  FieldPtr field(const Direction& seed) const;

  /// Parallel frame at t = 0: n x (n-1) ambient columns orthonormal to seed,
  /// in the order used by field(seed).
  Matrix initial_frame(const Direction& seed) const;

  /// Non-null for space forms and products of space forms.
  const DistanceOracle* distance_oracle() const;

  /// Closed-form log det A_v(t) when the model has one (seed-independent).
  std::optional<double> log_density(double t) const;

  /// True when R(t) along c_v does not depend on v.
  bool seed_independent() const;

  Direction default_seed() const;
  /// Uniform random unit vector; deterministic for a given rng state.
  Direction random_seed(std::mt19937_64& rng) const;

  std::shared_ptr<const DamekRicciAlgebra> damek_ricci_algebra() const;

  struct Impl;

 private:
  friend Model build_model(const ModelSpec& spec);
  std::shared_ptr<const Impl> impl_;
};

/// Throws Error(InvalidSpec) when the spec is invalid.
Model build_model(const ModelSpec& spec);

Matrix jacobi_operator(const Model& model, const Direction& seed, double t);

/// Throws Error(OracleUnavailable) without a distance oracle.
double distance(const Model& model, const Point& p, const Point& q);

}  // namespace hrank
