#include "harmonic_rank/hyperbolicity.hpp"

#include "harmonic_rank/errors.hpp"
#include "harmonic_rank/jacobi.hpp"
#include "harmonic_rank/parallel.hpp"
#include "harmonic_rank/rank.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace hrank {

namespace {

constexpr std::size_t kChunk = 1000;

const DistanceOracle& oracle_of(const Model& model) {
  const DistanceOracle* o = model.distance_oracle();
  if (!o) throw Error(ErrorCode::OracleUnavailable, "model " + canonical(model.spec()) + " has no distance oracle");
  return *o;
}

std::mt19937_64 chunk_rng(std::uint64_t seed, std::uint64_t scale_index, std::uint64_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(scale_index), static_cast<std::uint32_t>(chunk)};
  return std::mt19937_64(seq);
}

Point sample_point(const DistanceOracle& o, std::mt19937_64& rng, double s) {
  const Vector u = o.random_direction(rng);
  std::uniform_real_distribution<double> radius(0.0, s);
  return o.ray_point(u, radius(rng));
}

double relative_change(double prev, double cur) {
  if (prev == cur) return 0.0;
  if (prev == 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(cur - prev) / prev;
}

// Per-factor distance from the point at fraction s along a geodesic of length
// len (from X to Y) to a point P, given d(X,P) = dx and d(Y,P) = dy.
double stewart(double kappa, double dx, double dy, double len, double s) {
  if (len <= 0.0 || s <= 0.0) return dx;
  if (s >= 1.0) return dy;
  if (kappa == 0.0) {
    const double d2 = (1.0 - s) * dx * dx + s * dy * dy - s * (1.0 - s) * len * len;
    return std::sqrt(std::max(0.0, d2));
  }
  const double k = std::sqrt(-kappa);
  const double a = k * s * len, b = k * (1.0 - s) * len, l = k * len;
  // cosh d - 1 written with cosh x - 1 = 2 sinh^2(x/2) and
  // sinh a + sinh b - sinh(a+b) = -4 sinh(a/2) sinh(b/2) sinh((a+b)/2).
  auto hav = [](double x) {
    const double sh = std::sinh(0.5 * x);
    return 2.0 * sh * sh;
  };
  const double sl = std::sinh(l);
  const double num = hav(k * dx) * std::sinh(b) + hav(k * dy) * std::sinh(a) -
                     4.0 * std::sinh(0.5 * a) * std::sinh(0.5 * b) * std::sinh(0.5 * l);
  const double c = std::max(0.0, num / sl);
  // cosh d - 1 = c, so d = 2 asinh(sqrt(c / 2)).
  return 2.0 * std::asinh(std::sqrt(0.5 * c)) / k;
}

struct Triangle {
  const DistanceOracle& o;
  std::array<Point, 3> v;
  // fd[i][j][f]: factor-f distance between vertices i and j.
  std::array<std::array<std::vector<double>, 3>, 3> fd;

  Triangle(const DistanceOracle& oracle, const Point& a, const Point& b, const Point& c) : o(oracle), v{a, b, c} {
    const std::size_t nf = o.factors().size();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        fd[i][j].resize(nf);
        for (std::size_t f = 0; f < nf; ++f) fd[i][j][f] = i == j ? 0.0 : o.factor_distance(f, v[i].parts[f], v[j].parts[f]);
      }
  }

  // Distance between the point at fraction s on side (i, j) and the point at
  // fraction u on side (j, k).
  double side_distance(int i, int j, double s, int k, double u) const {
    double sum = 0.0;
    for (std::size_t f = 0; f < o.factors().size(); ++f) {
      const double kap = o.factors()[f].curvature;
      const double to_i = stewart(kap, fd[j][i][f], fd[k][i][f], fd[j][k][f], u);
      const double to_j = u * fd[j][k][f];
      const double d = stewart(kap, to_i, to_j, fd[i][j][f], s);
      sum += d * d;
    }
    return std::sqrt(sum);
  }
};

template <class F>
double golden_min(F&& f, double lo, double hi, double tol = 1e-10) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return std::min({f(a), f(b), fc, fd});
}

// Distance from the point at fraction s on side (i, j) to side (j, k). The
// distance along a geodesic is convex in CAT(0), so golden section is exact.
double to_side(const Triangle& tr, int i, int j, double s, int k) {
  return golden_min([&](double u) { return tr.side_distance(i, j, s, k, u); }, 0.0, 1.0, 1e-8);
}

}  // namespace

double gromov_product(const Model& model, const Point& x, const Point& y, const Point& w) {
  const DistanceOracle& o = oracle_of(model);
  const double p = 0.5 * (o.distance(x, w) + o.distance(y, w) - o.distance(x, y));
  return std::max(0.0, p);
}

double four_point_defect(const DistanceOracle& o, const Point& x, const Point& y, const Point& z, const Point& w) {
  std::array<double, 3> s{o.distance(x, y) + o.distance(z, w), o.distance(x, z) + o.distance(y, w),
                          o.distance(x, w) + o.distance(y, z)};
  std::sort(s.begin(), s.end());
  return std::max(0.0, 0.5 * (s[2] - s[1]));
}

std::string to_string(HyperbolicityVerdict v) {
  switch (v) {
    case HyperbolicityVerdict::Hyperbolic: return "Hyperbolic";
    case HyperbolicityVerdict::NotHyperbolic: return "NotHyperbolic";
    case HyperbolicityVerdict::Inconclusive: return "Inconclusive";
  }
  return "unknown";
}

void classify(HyperbolicityReport& r, const VerdictRule& rule) {
  const std::size_t n = r.delta_hat.size();
  r.last_changes.clear();
  for (std::size_t i = n >= 3 ? n - 2 : 1; i < n; ++i)
    r.last_changes.push_back(relative_change(r.delta_hat[i - 1], r.delta_hat[i]));
  r.slope = 0.0;
  if (n >= 2) {
    double c0;
    linear_fit(r.scales, r.delta_hat, c0, r.slope);
  }
  const bool stable = n >= 2 && std::all_of(r.last_changes.begin(), r.last_changes.end(),
                                            [&](double c) { return c < rule.stabilize; });
  if (stable)
    r.verdict = HyperbolicityVerdict::Hyperbolic;
  else if (r.slope > rule.growth_slope)
    r.verdict = HyperbolicityVerdict::NotHyperbolic;
  else
    r.verdict = HyperbolicityVerdict::Inconclusive;
}

namespace {

template <class Sample>
HyperbolicityReport scan(const std::string& method, const std::vector<double>& scales, std::size_t n,
                         std::uint64_t seed, unsigned workers, const VerdictRule& rule, Sample&& sample) {
  if (scales.empty() || n == 0) throw Error(ErrorCode::InvalidArgument, "need at least one scale and one sample");
  for (std::size_t i = 0; i < scales.size(); ++i)
    if (!(scales[i] > 0.0) || (i > 0 && scales[i] <= scales[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "scales must be positive and increasing");
  HyperbolicityReport r;
  r.method = method;
  r.scales = scales;
  r.samples_per_scale = n;
  r.seed = seed;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  double running = 0.0;
  for (std::size_t j = 0; j < scales.size(); ++j) {
    std::vector<double> chunk_max(chunks, 0.0);
    parallel_for(chunks, workers, [&](std::size_t c) {
      std::mt19937_64 rng = chunk_rng(seed, j, c);
      const std::size_t count = std::min(kChunk, n - c * kChunk);
      double m = 0.0;
      for (std::size_t k = 0; k < count; ++k) m = std::max(m, sample(rng, scales[j]));
      chunk_max[c] = m;
    });
    const double raw = *std::max_element(chunk_max.begin(), chunk_max.end());
    running = std::max(running, raw);
    r.delta_raw.push_back(raw);
    r.delta_hat.push_back(running);
  }
  classify(r, rule);
  return r;
}

}  // namespace

HyperbolicityReport delta_four_point(const Model& model, const std::vector<double>& scales, std::size_t n_quadruples,
                                     std::uint64_t seed, unsigned workers, const VerdictRule& rule) {
  const DistanceOracle& o = oracle_of(model);
  return scan("four_point", scales, n_quadruples, seed, workers, rule, [&](std::mt19937_64& rng, double s) {
    const Point x = sample_point(o, rng, s), y = sample_point(o, rng, s);
    const Point z = sample_point(o, rng, s), w = sample_point(o, rng, s);
    return four_point_defect(o, x, y, z, w);
  });
}

double triangle_thinness(const DistanceOracle& o, const Point& a, const Point& b, const Point& c,
                         std::size_t n_side_samples) {
  if (n_side_samples < 2) throw Error(ErrorCode::InvalidArgument, "need at least two side samples");
  const Triangle tr(o, a, b, c);
  double worst = 0.0;
  // Side (i, j) against sides (j, k) and (i, k); the latter is (k, i)
  // traversed backwards, so a point at fraction s on (i, j) is at 1 - s on (j, i).
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    auto gap = [&](double s) { return std::min(to_side(tr, i, j, s, k), to_side(tr, j, i, 1.0 - s, k)); };
    double best_s = 0.0, best = -1.0;
    for (std::size_t q = 0; q < n_side_samples; ++q) {
      const double s = static_cast<double>(q) / static_cast<double>(n_side_samples - 1);
      const double g = gap(s);
      if (g > best) {
        best = g;
        best_s = s;
      }
    }
    const double h = 1.0 / static_cast<double>(n_side_samples - 1);
    const double refined =
        -golden_min([&](double s) { return -gap(s); }, std::max(0.0, best_s - h), std::min(1.0, best_s + h), 1e-9);
    worst = std::max({worst, best, refined});
  }
  return worst;
}

HyperbolicityReport thin_triangle_delta(const Model& model, const std::vector<double>& scales,
                                        std::size_t n_triangles, std::size_t n_side_samples, std::uint64_t seed,
                                        unsigned workers, const VerdictRule& rule) {
  const DistanceOracle& o = oracle_of(model);
  return scan("thin_triangle", scales, n_triangles, seed, workers, rule, [&](std::mt19937_64& rng, double s) {
    const Point a = sample_point(o, rng, s), b = sample_point(o, rng, s), c = sample_point(o, rng, s);
    return triangle_thinness(o, a, b, c, n_side_samples);
  });
}

BusemannValue busemann_value(const Model& model, const Vector& v, const Point& q, double tol, double t_max) {
  const DistanceOracle& o = oracle_of(model);
  const double d0 = o.distance(o.basepoint(), q);
  double t = std::max(1.0, 2.0 * d0);
  auto b_at = [&](double tt) { return o.distance(q, o.ray_point(v, tt)) - tt; };
  BusemannValue out;
  double prev = b_at(t), prev_ex = std::numeric_limits<double>::quiet_NaN();
  for (int it = 1; t * 2.0 <= t_max; ++it) {
    t *= 2.0;
    const double cur = b_at(t);
    const double ex = 2.0 * cur - prev;
    out.iterations = it;
    out.t_final = t;
    if (std::abs(cur - prev) < tol) {
      out.value = cur;
      return out;
    }
    if (std::abs(ex - prev_ex) < tol) {
      out.value = ex;
      return out;
    }
    prev = cur;
    prev_ex = ex;
  }
  std::ostringstream os;
  os << "Busemann limit not within " << tol << " by t = " << t;
  throw Error(ErrorCode::NoConvergence, os.str());
}

LipschitzReport busemann_lipschitz_check(const Model& model, const Vector& v, std::size_t n_pairs, double radius,
                                         std::uint64_t seed) {
  const DistanceOracle& o = oracle_of(model);
  std::mt19937_64 rng(seed);
  LipschitzReport r;
  r.max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const Point p = sample_point(o, rng, radius), q = sample_point(o, rng, radius);
    const double diff = std::abs(busemann_value(model, v, p).value - busemann_value(model, v, q).value);
    r.max_excess = std::max(r.max_excess, diff - o.distance(p, q));
    ++r.pairs;
  }
  return r;
}

DivergenceReport divergence_rate(const Model& model, const Vector& v, const Vector& w, double T,
                                 std::optional<AnosovConstants> constants) {
  if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "T must be positive");
  if (v.size() != model.dim() || w.size() != model.dim())
    throw Error(ErrorCode::InvalidArgument, "directions have wrong dimension");
  const Vector vu = v.normalized(), wu = w.normalized();
  const double c = std::clamp(vu.dot(wu), -1.0, 1.0);
  const Vector perp = wu - c * vu;
  if (perp.norm() < 1e-12) throw Error(ErrorCode::InvalidArgument, "directions must not be parallel");
  const Vector e = perp.normalized();
  const double theta = std::acos(c);

  DivergenceReport out;
  out.angle = theta;
  const std::vector<double> times = uniform_grid(0.0, T, T / 32);
  out.t = times;
  out.upper.assign(times.size(), 0.0);
  const bool with_lower = constants.has_value();
  std::vector<double> lower(times.size(), 0.0);
  bool lower_valid = with_lower;
  const double beta = model.curvature_bound();

  // Composite Gauss-Legendre over the arc x(s) = cos(s) v + sin(s) e.
  const int pieces = std::max(1, static_cast<int>(std::ceil(theta / 0.5)));
  const auto [nodes, weights] = gauss_legendre(8);
  std::optional<RankReport> shared_rank;
  for (int p = 0; p < pieces; ++p) {
    const double s0 = theta * p / pieces, s1 = theta * (p + 1) / pieces;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * nodes[q];
      const double wt = 0.5 * (s1 - s0) * weights[q];
      const Vector x = std::cos(s) * vu + std::sin(s) * e;
      const Vector xp = -std::sin(s) * vu + std::cos(s) * e;
      const Direction dir(x);
      const FieldPtr field = model.field(dir);
      const Vector y = model.initial_frame(dir).transpose() * xp;
      const TensorTrajectory a = fundamental_A(field, times);
      for (std::size_t i = 0; i < times.size(); ++i) out.upper[i] += wt * (a.value(i) * y).norm();
      if (!lower_valid) continue;
      // (0, y) splits as stable (-b, -S' b) plus unstable (b, U' b) with
      // b = (U' - S')^{-1} y; Anosov constants bound each part, and
      // |J'| <= beta coth(beta t) |J| converts the Sasaki norm to |J|.
      if (!shared_rank || !model.seed_independent()) shared_rank = rank_of_field(field);
      const RankReport& rk = *shared_rank;
      if (rk.kernel_dim > 0) {
        lower_valid = false;
        continue;
      }
      const Vector b = (rk.Up - rk.Sp).ldlt().solve(y);
      const double nu = std::sqrt(b.squaredNorm() + (rk.Up * b).squaredNorm());
      const double ns = std::sqrt(b.squaredNorm() + (rk.Sp * b).squaredNorm());
      for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        if (t <= 0.0) continue;
        const double sasaki = std::exp(constants->alpha * t) / constants->a * nu - constants->a * std::exp(-constants->alpha * t) * ns;
        const double ct = beta > 0.0 ? beta / std::tanh(beta * t) : 1.0 / t;
        lower[i] += wt * std::max(0.0, sasaki) / std::sqrt(1.0 + ct * ct);
      }
    }
  }
  if (lower_valid) out.lower = lower;

  std::vector<double> ts, ls;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] >= 0.5 * T - 1e-12 && out.upper[i] > 0.0) {
      ts.push_back(times[i]);
      ls.push_back(std::log(out.upper[i]));
    }
  double c0 = 0.0;
  if (ts.size() >= 2) linear_fit(ts, ls, c0, out.alpha);
  out.linear_ratio = out.upper.back() / T;
  return out;
}

VolumeComparison volume_comparison(const Model& model, const Vector& v, double delta_in, double r, std::size_t n_mc,
                                   std::uint64_t seed, unsigned workers) {
  const DistanceOracle& o = oracle_of(model);
  if (o.factors().size() != 1 || o.factors()[0].curvature >= 0.0)
    throw Error(ErrorCode::InvalidArgument, "volume comparison needs a single hyperbolic factor");
  if (!(delta_in > 0.0) || !(r > 0.0) || n_mc == 0) throw Error(ErrorCode::InvalidArgument, "bad volume comparison input");
  VolumeComparison out;
  out.ell = delta_in + 1.0;
  out.rho = 4.0 * delta_in + 2.0;
  out.r = r;
  out.n_mc = n_mc;
  out.seed = seed;
  const int n = o.dim();
  out.h = (n - 1) * std::sqrt(-o.factors()[0].curvature);

  const Vector vu = v.normalized();
  const Point vp = o.ray_point(vu, out.ell), vm = o.ray_point(vu, -out.ell);
  const std::size_t chunks = (n_mc + kChunk - 1) / kChunk;
  std::vector<std::size_t> hits(chunks, 0);
  parallel_for(chunks, workers, [&](std::size_t c) {
    std::mt19937_64 rng = chunk_rng(seed, 0, c);
    const std::size_t count = std::min(kChunk, n_mc - c * kChunk);
    std::size_t h = 0;
    for (std::size_t k = 0; k < count; ++k) {
      const Vector wdir = o.random_direction(rng);
      if (o.distance(vp, o.ray_point(wdir, out.ell)) <= 1.0 && o.distance(vm, o.ray_point(wdir, -out.ell)) <= 1.0) ++h;
    }
    hits[c] = h;
  });
  std::size_t total = 0;
  for (std::size_t h : hits) total += h;
  const double nn = static_cast<double>(n_mc);
  out.fraction = static_cast<double>(total) / nn;
  out.fraction_se = std::sqrt(out.fraction * (1.0 - out.fraction) / nn);
  const double area = unit_sphere_area(n);
  out.cone_measure = out.fraction * area;

  // int_0^r f by Gauss-Legendre on unit pieces of the closed-form density.
  const auto [nodes, weights] = gauss_legendre(12);
  const int pieces = std::max(1, static_cast<int>(std::ceil(r)));
  for (int p = 0; p < pieces; ++p) {
    const double a = r * p / pieces, b = r * (p + 1) / pieces;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * nodes[q];
      const auto lf = model.log_density(t);
      if (!lf) throw Error(ErrorCode::OracleUnavailable, "model has no closed-form density");
      out.density_integral += 0.5 * (b - a) * weights[q] * std::exp(*lf);
    }
  }
  out.lhs = out.density_integral * out.cone_measure;
  out.lhs_se = out.density_integral * out.fraction_se * area;
  out.horosphere_volume = *o.horosphere_ball_volume(out.rho);
  out.rhs = std::exp(out.h * r) / out.h * out.horosphere_volume;
  out.ratio = out.lhs / out.rhs;
  out.holds = out.lhs + 2.0 * out.lhs_se <= out.rhs;
  return out;
}

}  // namespace hrank
