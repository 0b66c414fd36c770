#pragma once

#include "harmonic_rank/linalg.hpp"

#include <optional>
#include <random>
#include <vector>

namespace hrank {

/// One factor of a point, in geodesic polar coordinates about the factor's
/// basepoint. Large radii stay exact because distances never leave this form.
struct FactorPoint {
  double radius = 0.0;
  Vector direction;  // unit vector; ignored when radius == 0
};

struct Point {
  std::vector<FactorPoint> parts;
};

struct FactorGeometry {
  int dim = 2;
  double curvature = -1.0;  // <= 0
};

/// Closed-form distances on products of space forms. Directions are ambient
/// unit vectors in R^n, split into factor blocks in order.
class DistanceOracle {
 public:
  explicit DistanceOracle(std::vector<FactorGeometry> factors);

  int dim() const { return dim_; }
  const std::vector<FactorGeometry>& factors() const { return factors_; }

  Point basepoint() const;
  /// c_v(t) for the geodesic from the basepoint with unit initial velocity v.
  /// Negative t walks along -v.
  Point ray_point(const Vector& v, double t) const;
  /// Point at distance |t| from p along the direction obtained by radially
  /// transporting `direction` (ambient unit vector at the basepoint) to p.
  Point geodesic_point(const Point& p, const Vector& direction, double t) const;

  double distance(const Point& a, const Point& b) const;
  double factor_distance(std::size_t i, const FactorPoint& a, const FactorPoint& b) const;

  /// Ambient coordinates: flat factors give r u; hyperbolic ones give the
  /// spatial part of the hyperboloid model (sinh(k r)/k) u.
  Vector embed(const Point& p) const;

  /// Induced volume of the horosphere through the basepoint intersected with
  /// the ball B(basepoint, rho); only for a single hyperbolic factor.
  std::optional<double> horosphere_ball_volume(double rho) const;

  /// Uniform direction on S^{n-1}.
  Vector random_direction(std::mt19937_64& rng) const;

 private:
  std::vector<FactorGeometry> factors_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

/// Volume of the unit ball in R^m.
double unit_ball_volume(int m);
/// Area of the unit sphere S^{m-1} in R^m.
double unit_sphere_area(int m);

}  // namespace hrank
