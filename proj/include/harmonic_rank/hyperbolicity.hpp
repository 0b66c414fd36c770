#pragma once

#include "harmonic_rank/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hrank {

/// (x|y)_w = (d(x,w) + d(y,w) - d(x,y)) / 2. Throws OracleUnavailable.
double gromov_product(const Model& model, const Point& x, const Point& y, const Point& w);

/// Four-point defect of one quadruple: max over the three pairings of
/// min((x|z)_w, (y|z)_w) - (x|y)_w, clipped at 0. Equals half the gap between
/// the two largest of the pair sums d(x,y)+d(z,w), d(x,z)+d(y,w), d(x,w)+d(y,z).
double four_point_defect(const DistanceOracle& oracle, const Point& x, const Point& y, const Point& z, const Point& w);

enum class HyperbolicityVerdict { Hyperbolic, NotHyperbolic, Inconclusive };
std::string to_string(HyperbolicityVerdict v);

struct HyperbolicityReport {
  std::string method;  // "four_point" or "thin_triangle"
  std::vector<double> scales;
  /// Running maximum over scales <= s, so nondecreasing.
  std::vector<double> delta_hat;
  /// Per-scale sample maximum before the running maximum.
  std::vector<double> delta_raw;
  HyperbolicityVerdict verdict = HyperbolicityVerdict::Inconclusive;
  /// Relative changes of delta_hat over the last two doublings.
  std::vector<double> last_changes;
  /// Least-squares slope of delta_hat against scale.
  double slope = 0.0;
  std::size_t samples_per_scale = 0;
  std::uint64_t seed = 0;
  std::optional<double> divergence_alpha;
};

struct VerdictRule {
  double stabilize = 0.05;
  double growth_slope = 0.1;
};

/// Stable if the last two relative changes are below rule.stabilize, growing
/// if the fitted slope exceeds rule.growth_slope, otherwise Inconclusive.
void classify(HyperbolicityReport& report, const VerdictRule& rule = {});

/// Points are c_u(r) with u uniform on the unit sphere and r uniform in
/// [0, s]. Sample k of scale j draws from a generator seeded by
/// (seed, j, k / chunk), so the result does not depend on `workers`.
HyperbolicityReport delta_four_point(const Model& model, const std::vector<double>& scales, std::size_t n_quadruples,
                                     std::uint64_t seed, unsigned workers = 1, const VerdictRule& rule = {});

/// Distance from points of one side to the union of the other two, with side
/// points at n_side_samples parameters plus golden-section refinement.
double triangle_thinness(const DistanceOracle& oracle, const Point& a, const Point& b, const Point& c,
                         std::size_t n_side_samples);

HyperbolicityReport thin_triangle_delta(const Model& model, const std::vector<double>& scales,
                                        std::size_t n_triangles, std::size_t n_side_samples, std::uint64_t seed,
                                        unsigned workers = 1, const VerdictRule& rule = {});

struct BusemannValue {
  double value = 0.0;
  double t_final = 0.0;
  int iterations = 0;
};

/// lim d(q, c_v(t)) - t by doubling t, with a Richardson step against the
/// 1/t tail of flat factors. Throws NoConvergence past t_max.
BusemannValue busemann_value(const Model& model, const Vector& v, const Point& q, double tol = 1e-9,
                             double t_max = 1e7);

struct LipschitzReport {
  /// max over pairs of |b(p) - b(q)| - d(p, q).
  double max_excess = 0.0;
  std::size_t pairs = 0;
};

LipschitzReport busemann_lipschitz_check(const Model& model, const Vector& v, std::size_t n_pairs, double radius,
                                         std::uint64_t seed);

struct DivergenceReport {
  double angle = 0.0;
  std::vector<double> t;
  /// Length of t -> exp_q(t x(s)) over the great-circle arc x from v to w.
  std::vector<double> upper;
  /// Lower bracket for the same length from Anosov constants; empty unless
  /// constants were supplied and the model has rank one along every node.
  std::vector<double> lower;
  /// Slope of log(upper) over [T/2, T].
  double alpha = 0.0;
  /// upper(T) / T.
  double linear_ratio = 0.0;
};

struct AnosovConstants {
  double alpha = 0.0;
  double a = 1.0;
};

DivergenceReport divergence_rate(const Model& model, const Vector& v, const Vector& w, double T,
                                 std::optional<AnosovConstants> constants = std::nullopt);

struct VolumeComparison {
  double ell = 0.0, rho = 0.0, r = 0.0, h = 0.0;
  /// Monte Carlo fraction of S_pX in the cone and its standard error.
  double fraction = 0.0, fraction_se = 0.0;
  double cone_measure = 0.0;
  double density_integral = 0.0;
  double lhs = 0.0, lhs_se = 0.0;
  double horosphere_volume = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  /// lhs + 2 se <= rhs.
  bool holds = false;
  std::size_t n_mc = 0;
  std::uint64_t seed = 0;
};

/// Only for a single hyperbolic factor; ell = delta_in + 1, rho = 4 delta_in + 2.
VolumeComparison volume_comparison(const Model& model, const Vector& v, double delta_in, double r, std::size_t n_mc,
                                   std::uint64_t seed, unsigned workers = 1);

}  // namespace hrank
