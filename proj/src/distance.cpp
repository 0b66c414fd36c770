#include "harmonic_rank/distance.hpp"

#include "harmonic_rank/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace hrank {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sinh(double y) { return y + std::log1p(-std::exp(-2.0 * y)) - std::numbers::ln2; }

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

FactorPoint polar(const Vector& q) {
  FactorPoint fp;
  const double r = q.norm();
  fp.radius = r;
  if (r > 0.0) {
    fp.direction = q / r;
  } else {
    fp.direction = Vector::Unit(q.size(), 0);
  }
  return fp;
}

}  // namespace

double unit_ball_volume(int m) { return std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m + 1.0); }

double unit_sphere_area(int m) { return m * unit_ball_volume(m); }

DistanceOracle::DistanceOracle(std::vector<FactorGeometry> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw Error(ErrorCode::InvalidArgument, "distance oracle needs a factor");
  for (const auto& f : factors_) {
    if (f.dim < 1 || f.curvature > 0.0) throw Error(ErrorCode::InvalidArgument, "bad factor geometry");
    offsets_.push_back(dim_);
    dim_ += f.dim;
  }
}

Point DistanceOracle::basepoint() const {
  Point p;
  for (const auto& f : factors_) p.parts.push_back(FactorPoint{0.0, Vector::Unit(f.dim, 0)});
  return p;
}

Point DistanceOracle::ray_point(const Vector& v, double t) const {
  if (v.size() != dim_) throw Error(ErrorCode::InvalidArgument, "direction has wrong dimension");
  Point p;
  const double sign = t < 0.0 ? -1.0 : 1.0;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const Vector vi = sign * v.segment(offsets_[i], factors_[i].dim);
    const double b = vi.norm();
    if (b == 0.0) {
      p.parts.push_back(FactorPoint{0.0, Vector::Unit(factors_[i].dim, 0)});
    } else {
      p.parts.push_back(FactorPoint{b * std::abs(t), vi / b});
    }
  }
  return p;
}

Point DistanceOracle::geodesic_point(const Point& p, const Vector& direction, double t) const {
  if (direction.size() != dim_) throw Error(ErrorCode::InvalidArgument, "direction has wrong dimension");
  Point out;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const FactorPoint& fp = p.parts[i];
    const Vector wi = direction.segment(offsets_[i], factors_[i].dim);
    const double b = wi.norm();
    if (b == 0.0 || t == 0.0) {
      out.parts.push_back(fp);
      continue;
    }
    const Vector w = wi / b;
    const double tau = b * t;
    const double kappa = factors_[i].curvature;
    if (kappa == 0.0) {
      out.parts.push_back(polar(fp.radius * fp.direction + tau * w));
      continue;
    }
    const double k = std::sqrt(-kappa);
    const double rho = k * fp.radius;
    // Walk forward only; a negative t walks along -w.
    const Vector ww = tau < 0.0 ? Vector(-w) : w;
    const double sig = k * std::abs(tau);
    // Hyperboloid model with p boosted out from the basepoint. Coordinates of
    // the new spatial position along u and along the unit e in span(u, w):
    //   a = cosh(sig) sinh(rho) + sinh(sig) cosh(rho) cos(phi)
    //     = sinh(rho - sig) + sinh(sig) cosh(rho) (1 + cos(phi))
    //   b = sinh(sig) sin(phi)
    // The second form of a avoids cancellation when the walk heads back
    // towards the basepoint.
    const Vector& u = fp.direction;
    const double cos_phi = u.dot(ww);
    const Vector perp = ww - cos_phi * u;
    const double sin_phi = perp.norm();
    const double one_plus_cos = 0.5 * (u + ww).squaredNorm();
    const double ca = std::sinh(rho - sig) + std::sinh(sig) * std::cosh(rho) * one_plus_cos;
    const double cb = std::sinh(sig) * sin_phi;
    Vector qs = ca * u;
    if (sin_phi > 0.0) qs += cb * (perp / sin_phi);
    const double len = qs.norm();
    FactorPoint q;
    q.radius = std::asinh(len) / k;
    q.direction = len > 0.0 ? Vector(qs / len) : Vector::Unit(factors_[i].dim, 0);
    out.parts.push_back(q);
  }
  return out;
}

double DistanceOracle::factor_distance(std::size_t i, const FactorPoint& a, const FactorPoint& b) const {
  const double r1 = a.radius, r2 = b.radius;
  double s = 0.0;
  if (r1 > 0.0 && r2 > 0.0) s = std::min(1.0, 0.5 * (a.direction - b.direction).norm());
  const double kappa = factors_[i].curvature;
  if (kappa == 0.0) {
    const double d2 = (r1 - r2) * (r1 - r2) + 4.0 * r1 * r2 * s * s;
    return std::sqrt(std::max(0.0, d2));
  }
  // sinh^2(k d/2) = sinh^2(k (r1-r2)/2) + sinh(k r1) sinh(k r2) sin^2(theta/2)
  const double k = std::sqrt(-kappa);
  const double x1 = k * r1, x2 = k * r2;
  if (std::max(x1, x2) < 300.0) {
    const double sh = std::sinh(0.5 * (x1 - x2));
    const double val = sh * sh + std::sinh(x1) * std::sinh(x2) * s * s;
    return 2.0 * std::asinh(std::sqrt(std::max(0.0, val))) / k;
  }
  const double la = x1 == x2 ? kNegInf : 2.0 * log_sinh(0.5 * std::abs(x1 - x2));
  const double lb = (s == 0.0 || x1 == 0.0 || x2 == 0.0) ? kNegInf : log_sinh(x1) + log_sinh(x2) + 2.0 * std::log(s);
  const double l = log_add(la, lb);
  if (l == kNegInf) return 0.0;
  // asinh(x) = log x + log(1 + sqrt(1 + x^-2)) with x = e^{l/2}
  const double asinh_val = 0.5 * l + std::log1p(std::sqrt(1.0 + std::exp(-l)));
  return 2.0 * asinh_val / k;
}

double DistanceOracle::distance(const Point& a, const Point& b) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const double d = factor_distance(i, a.parts[i], b.parts[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

Vector DistanceOracle::embed(const Point& p) const {
  Vector out(dim_);
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const double kappa = factors_[i].curvature;
    const FactorPoint& fp = p.parts[i];
    const double scale = kappa == 0.0 ? fp.radius : std::sinh(std::sqrt(-kappa) * fp.radius) / std::sqrt(-kappa);
    out.segment(offsets_[i], factors_[i].dim) = scale * fp.direction;
  }
  return out;
}

std::optional<double> DistanceOracle::horosphere_ball_volume(double rho) const {
  if (factors_.size() != 1 || factors_[0].curvature >= 0.0) return std::nullopt;
  const double k = std::sqrt(-factors_[0].curvature);
  const int m = factors_[0].dim - 1;
  return unit_ball_volume(m) * std::pow(2.0 * std::sinh(0.5 * k * rho) / k, m);
}

Vector DistanceOracle::random_direction(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim_);
  double nrm = 0.0;
  while (nrm < 1e-12) {
    for (int i = 0; i < dim_; ++i) v(i) = normal(rng);
    nrm = v.norm();
  }
  return v / nrm;
}

}  // namespace hrank
