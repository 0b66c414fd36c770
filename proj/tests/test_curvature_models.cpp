#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "harmonic_rank/damek_ricci.hpp"
#include "harmonic_rank/errors.hpp"
#include "harmonic_rank/hermite.hpp"
#include "harmonic_rank/model.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace hrank;

namespace {

// Independent sectional-curvature oracle for a left-invariant metric with an
// orthonormal basis: the Cheeger-Ebin form of Milnor's formula, driven only by
// a bracket callback.
using Bracket = std::function<Vector(const Vector&, const Vector&)>;

Vector u_term(const Bracket& br, const Vector& x, const Vector& y, int n) {
  // 2 <U(x,y), z> = <[z,x], y> + <x, [z,y]>
  Vector u(n);
  for (int i = 0; i < n; ++i) {
    const Vector z = Vector::Unit(n, i);
    u(i) = 0.5 * (br(z, x).dot(y) + x.dot(br(z, y)));
  }
  return u;
}

double milnor_sectional(const Bracket& br, Vector x, Vector y) {
  const int n = static_cast<int>(x.size());
  x.normalize();
  y -= y.dot(x) * x;
  y.normalize();
  const Vector xy = br(x, y);
  const double k = -0.75 * xy.squaredNorm() - 0.5 * br(x, br(x, y)).dot(y) - 0.5 * br(y, br(y, x)).dot(x) +
                   u_term(br, x, y, n).squaredNorm() - u_term(br, x, x, n).dot(u_term(br, y, y, n));
  return k;
}

// Full Jacobi operator on xi^perp recovered by polarization of the sectional
// curvature oracle: <K w1, w2> = (Q(w1+w2) - Q(w1) - Q(w2)) / 2 with
// Q(w) = sec(w, xi) |w|^2.
Matrix polarized_jacobi(const Bracket& br, const Vector& xi, const Matrix& frame) {
  const int m = static_cast<int>(frame.cols());
  auto q = [&](const Vector& w) { return milnor_sectional(br, w, xi) * w.squaredNorm(); };
  Matrix k(m, m);
  for (int i = 0; i < m; ++i) k(i, i) = q(frame.col(i));
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      k(i, j) = k(j, i) = 0.5 * (q(frame.col(i) + frame.col(j)) - k(i, i) - k(j, j));
    }
  return k;
}

Bracket dr_bracket_from_clifford(const std::vector<Matrix>& js, int p, int q) {
  return [js, p, q](const Vector& x, const Vector& y) {
    const int n = p + q + 1;
    const int a = p + q;
    Vector out = Vector::Zero(n);
    // [A, V] = V, [A, Z] = 2Z
    out.head(p) += x(a) * y.head(p) - y(a) * x.head(p);
    out.segment(p, q) += 2.0 * (x(a) * y.segment(p, q) - y(a) * x.segment(p, q));
    // [V, W] = 2 sum_k <J_k V, W> Z_k
    for (int k = 0; k < q; ++k) out(p + k) += 2.0 * (js[k] * x.head(p)).dot(y.head(p));
    return out;
  };
}

Vector random_unit(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v.normalized();
}

}  // namespace

TEST_CASE("spec parsing and canonical round trip") {
  for (const char* alias : {"h2", "h3", "h4", "h2:-4", "flat2", "flat3", "twoblock21", "twoblock:2,1", "dr:2,1",
                            "dr:4,2", "synthetic:sin", "h2xr", "h3*r", "ch3", "hh2", "oh2"}) {
    const ModelSpec s = parse_model_spec(alias);
    const std::string c = canonical(s);
    CHECK(parse_model_spec(c) == s);
    CHECK(canonical(parse_model_spec(c)) == c);
  }
  CHECK(canonical(parse_model_spec("h3")) == "space_form(n=3,kappa=-1)");
  CHECK(canonical(parse_model_spec("h2xr")) == "product(space_form(n=2,kappa=-1),space_form(n=1,kappa=0))");
  CHECK(parse_model_spec("ch2") == ModelSpec::two_block(2, 1));
  CHECK(parse_model_spec("hh2") == ModelSpec::two_block(4, 3));
  CHECK(parse_model_spec("oh2") == ModelSpec::two_block(8, 7));
  const ModelSpec syn = parse_model_spec("synthetic(blocks=[sin(base=-1,amp=-0.4)],twist=0)");
  CHECK(syn.blocks.size() == 1);
  CHECK(syn.blocks[0].frequency == 1.0);
}

TEST_CASE("invalid specs are rejected") {
  auto code_of = [](const std::string& text) {
    try {
      parse_model_spec(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ConfigError;
  };
  CHECK(code_of("h2:0.5") == ErrorCode::InvalidSpec);
  CHECK(code_of("two_block(n=5,m1=2,m4=1)") == ErrorCode::InvalidSpec);
  CHECK(code_of("dr:3,1") == ErrorCode::InvalidSpec);
  CHECK(code_of("dr:2,2") == ErrorCode::InvalidSpec);
  CHECK(code_of("dr:16,8") == ErrorCode::InvalidSpec);
  CHECK(code_of("synthetic(blocks=[sin(base=-0.2,amp=0.5)])") == ErrorCode::InvalidSpec);
  CHECK(code_of("r") == ErrorCode::InvalidSpec);
  CHECK(code_of("h2*dr:2,1") == ErrorCode::InvalidSpec);
  CHECK(code_of("nonsense") == ErrorCode::InvalidSpec);
  CHECK(code_of("space_form(n=3,kappa=-1,extra=2)") == ErrorCode::InvalidSpec);
}

TEST_CASE("constant fields") {
  const Model h3 = build_model(parse_model_spec("h3"));
  CHECK(h3.curvature_bound() == doctest::Approx(1.0));
  const Matrix r = jacobi_operator(h3, h3.default_seed(), 5.0);
  CHECK((r + Matrix::Identity(2, 2)).norm() == 0.0);

  const Model tb = build_model(parse_model_spec("twoblock21"));
  CHECK(tb.curvature_bound() == 2.0);
  const Matrix rt = jacobi_operator(tb, tb.default_seed(), 1.0);
  Vector want(3);
  want << -1, -1, -4;
  CHECK((rt - Matrix(want.asDiagonal())).norm() == 0.0);

  const Model h2m4 = build_model(parse_model_spec("h2:-4"));
  CHECK(h2m4.curvature_bound() == doctest::Approx(2.0));
  CHECK(jacobi_operator(h2m4, h2m4.default_seed(), 0.3)(0, 0) == -4.0);
}

TEST_CASE("synthetic field evaluation") {
  const Model syn = build_model(parse_model_spec("synthetic:sin"));
  CHECK(jacobi_operator(syn, syn.default_seed(), std::numbers::pi / 2)(0, 0) == doctest::Approx(-1.4).epsilon(1e-15));
  CHECK(syn.curvature_bound() == doctest::Approx(std::sqrt(1.4)));

  SyntheticBlock b1{-1.0, -0.3, 1.0, 0.0}, b2{-2.0, 0.5, 2.0, 0.3};
  const Model tw = build_model(ModelSpec::synthetic({b1, b2}, 0.7));
  const FieldPtr f = tw.field(tw.default_seed());
  for (double t : {-3.0, 0.0, 1.1, 4.0}) {
    const Matrix r = f->evaluate(t);
    CHECK((r - r.transpose()).norm() < 1e-15);
    const Vector ev = sym_eigenvalues(r);
    const double lo = std::min(b1.value(t), b2.value(t)), hi = std::max(b1.value(t), b2.value(t));
    CHECK(ev(0) == doctest::Approx(lo).epsilon(1e-13));
    CHECK(ev(1) == doctest::Approx(hi).epsilon(1e-13));
  }
}

TEST_CASE("product of space forms") {
  const Model m = build_model(parse_model_spec("h2xr"));
  const Matrix r = jacobi_operator(m, m.default_seed(), 2.0);
  CHECK(r(0, 0) == -1.0);
  CHECK(r(1, 1) == 0.0);
  CHECK(std::abs(r(0, 1)) == 0.0);

  const double th = 0.6;
  Vector v(3);
  v << std::cos(th), 0.0, std::sin(th);
  const Direction seed(v);
  const Matrix frame = m.initial_frame(seed);
  CHECK((frame.transpose() * frame - Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK((frame.transpose() * seed.vec()).norm() < 1e-14);
  const Vector ev = sym_eigenvalues(m.field(seed)->evaluate(0.0));
  CHECK(ev(0) == doctest::Approx(-std::cos(th) * std::cos(th)));
  CHECK(ev(1) == doctest::Approx(0.0));

  // Direct check of the frame against the product curvature tensor: on each
  // factor R(w, x)x = kappa (|x|^2 w - <w,x> x).
  std::mt19937_64 rng(7);
  const Model hh = build_model(parse_model_spec("h2*h3:-4*r"));
  for (int trial = 0; trial < 5; ++trial) {
    const Direction s = hh.random_seed(rng);
    const Matrix e = hh.initial_frame(s);
    const Vector& x = s.vec();
    Matrix k = Matrix::Zero(6, 6);
    int off = 0;
    for (auto [d, kap] : std::vector<std::pair<int, double>>{{2, -1.0}, {3, -4.0}, {1, 0.0}}) {
      const Vector xi = x.segment(off, d);
      k.block(off, off, d, d) = kap * (xi.squaredNorm() * Matrix::Identity(d, d) - xi * xi.transpose());
      off += d;
    }
    const Matrix want = e.transpose() * k * e;
    CHECK((hh.field(s)->evaluate(0.0) - want).norm() < 1e-13);
  }
}

TEST_CASE("Hermite weights reproduce quintics") {
  auto p = [](double t) { return 1 + t - 2 * t * t + 0.5 * std::pow(t, 3) - std::pow(t, 4) + 0.3 * std::pow(t, 5); };
  auto dp = [](double t) { return 1 - 4 * t + 1.5 * t * t - 4 * std::pow(t, 3) + 1.5 * std::pow(t, 4); };
  auto ddp = [](double t) { return -4 + 3 * t - 12 * t * t + 6 * std::pow(t, 3); };
  const double t0 = 0.4, h = 0.7;
  for (double s : {0.0, 0.13, 0.5, 0.91, 1.0}) {
    const auto w = hermite5_weights(s, h);
    const auto wd = hermite5_weights(s, h, true);
    const double t1 = t0 + h;
    CHECK(hermite5(w, p(t0), dp(t0), ddp(t0), p(t1), dp(t1), ddp(t1)) == doctest::Approx(p(t0 + s * h)).epsilon(1e-13));
    CHECK(hermite5(wd, p(t0), dp(t0), ddp(t0), p(t1), dp(t1), ddp(t1)) ==
          doctest::Approx(dp(t0 + s * h)).epsilon(1e-12));
  }
}

TEST_CASE("Milnor oracle reproduces constant curvature -1 on the real hyperbolic group") {
  const int n = 4;
  Bracket br = [n](const Vector& x, const Vector& y) {
    Vector out = Vector::Zero(n);
    out.head(n - 1) = x(n - 1) * y.head(n - 1) - y(n - 1) * x.head(n - 1);
    return out;
  };
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    CHECK(milnor_sectional(br, random_unit(rng, n), random_unit(rng, n)) == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("Damek-Ricci curvature matches the Milnor oracle") {
  std::mt19937_64 rng(11);
  for (auto [p, q] : std::vector<std::pair<int, int>>{{2, 1}, {4, 1}, {4, 2}, {4, 3}, {8, 5}, {8, 7}}) {
    CAPTURE(p);
    CAPTURE(q);
    const DamekRicciAlgebra alg(p, q);
    const auto& js = alg.clifford();
    REQUIRE(static_cast<int>(js.size()) == q);
    for (int k = 0; k < q; ++k) {
      CHECK((js[k] + js[k].transpose()).norm() < 1e-15);
      CHECK((js[k] * js[k] + Matrix::Identity(p, p)).norm() < 1e-15);
    }
    const Bracket br = dr_bracket_from_clifford(js, p, q);
    const int n = p + q + 1;
    for (int trial = 0; trial < 5; ++trial) {
      const Vector x = random_unit(rng, n), y = random_unit(rng, n);
      CHECK((alg.bracket(x, y) - br(x, y)).norm() < 1e-13);
      const double sec = alg.sectional(x, y);
      CHECK(sec == doctest::Approx(milnor_sectional(br, x, y)).epsilon(1e-10));
      CHECK(sec <= 1e-10);
      CHECK(sec >= -4.0 - 1e-10);
      if (q == 1) CHECK(sec <= -1.0 + 1e-10);

      const Matrix frame = orthogonal_complement(Matrix(x));
      const Matrix k = frame.transpose() * alg.jacobi_operator(x) * frame;
      CHECK((symmetrize(k) - polarized_jacobi(br, x, frame)).norm() < 1e-9);
    }
  }
}

TEST_CASE("complex hyperbolic plane has spectrum {-4,-1,-1} in every direction") {
  const DamekRicciAlgebra alg(2, 1);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = random_unit(rng, 4);
    const Matrix frame = orthogonal_complement(Matrix(x));
    const Vector ev = sym_eigenvalues(frame.transpose() * alg.jacobi_operator(x) * frame);
    CHECK(ev(0) == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(ev(1) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(ev(2) == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("Damek-Ricci geodesic frames") {
  const Model dr21 = build_model(parse_model_spec("damek_ricci(p=2,q=1,horizon=12)"));
  {
    const FieldPtr f = dr21.field(dr21.default_seed());
    const Vector ev = sym_eigenvalues(f->evaluate(0.0));
    CHECK(ev(0) == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(ev(1) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(ev(2) == doctest::Approx(-1.0).epsilon(1e-12));
  }
  std::mt19937_64 rng(17);
  // Symmetric case: the Jacobi operator is parallel along every geodesic.
  for (int trial = 0; trial < 3; ++trial) {
    const Direction seed = dr21.random_seed(rng);
    const auto f = std::dynamic_pointer_cast<const DamekRicciField>(dr21.field(seed));
    REQUIRE(f);
    CHECK(f->max_drift() < 1e-10);
    const Matrix r0 = f->evaluate(0.0);
    for (double t : {-11.0, -3.3, 0.77, 5.0, 12.0}) CHECK((f->evaluate(t) - r0).norm() < 1e-8);
  }

  // Non-symmetric (4,2): R(t) varies, but its trace (Ricci) is constant.
  const Model dr42 = build_model(parse_model_spec("damek_ricci(p=4,q=2,horizon=10)"));
  double variation = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const Direction seed = dr42.random_seed(rng);
    const auto f = dr42.field(seed);
    const Matrix r0 = f->evaluate(0.0);
    const Vector ev0 = sym_eigenvalues(r0);
    CHECK(ev0(0) >= -4.0 - 1e-10);
    CHECK(ev0(ev0.size() - 1) <= 1e-10);
    for (double t : {-9.0, -2.5, 1.0, 4.2, 10.0}) {
      const Matrix r = f->evaluate(t);
      CHECK(r.trace() == doctest::Approx(r0.trace()).epsilon(1e-8));
      variation = std::max(variation, (r - r0).norm());
      const Vector ev = sym_eigenvalues(r);
      CHECK(ev(0) >= -4.0 - 1e-8);
      CHECK(ev(ev.size() - 1) <= 1e-8);
    }
  }
  CHECK(variation > 1e-2);

  CHECK_THROWS_AS(dr42.field(dr42.default_seed())->evaluate(10.5), Error);
}

TEST_CASE("distance oracle") {
  const Model h2 = build_model(parse_model_spec("h2"));
  const DistanceOracle& o = *h2.distance_oracle();
  Vector v(2);
  v << 1, 0;
  CHECK(distance(h2, o.ray_point(v, 1.0), o.ray_point(v, 4.0)) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(distance(h2, o.ray_point(v, -1.5), o.ray_point(v, 4.0)) == doctest::Approx(5.5).epsilon(1e-14));
  // Log-domain branch on very large radii.
  CHECK(distance(h2, o.ray_point(v, 350.0), o.ray_point(v, 400.0)) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(distance(h2, o.ray_point(v, -350.0), o.ray_point(v, 400.0)) == doctest::Approx(750.0).epsilon(1e-12));
  // Angle pi/2 at unit radii: cosh d = cosh^2 1.
  Vector w(2);
  w << 0, 1;
  CHECK(distance(h2, o.ray_point(v, 1.0), o.ray_point(w, 1.0)) ==
        doctest::Approx(std::acosh(std::cosh(1.0) * std::cosh(1.0))).epsilon(1e-13));
  // Log-domain branch against the direct formula, which still fits in a
  // double at these radii.
  {
    const Vector u2 = (v + 1e-3 * w).normalized();
    const double r1 = 320.0, r2 = 330.5;
    const double s = 0.5 * (v - u2).norm();
    const double direct =
        2.0 * std::asinh(std::sqrt(std::pow(std::sinh(0.5 * (r1 - r2)), 2) + std::sinh(r1) * std::sinh(r2) * s * s));
    CHECK(o.factor_distance(0, {r1, v}, {r2, u2}) == doctest::Approx(direct).epsilon(1e-13));
  }

  const Model flat = build_model(parse_model_spec("flat2"));
  CHECK(distance(flat, flat.distance_oracle()->ray_point(v, 3.0), flat.distance_oracle()->ray_point(w, 4.0)) ==
        doctest::Approx(5.0));

  const Model dr = build_model(parse_model_spec("dr:2,1"));
  CHECK(dr.distance_oracle() == nullptr);
  CHECK_THROWS_AS(distance(dr, Point{}, Point{}), Error);
  CHECK(build_model(parse_model_spec("synthetic:sin")).distance_oracle() == nullptr);
}

TEST_CASE("product distance is the Pythagorean combination of factor distances") {
  const Model m = build_model(parse_model_spec("h2xr"));
  const DistanceOracle& o = *m.distance_oracle();
  std::mt19937_64 rng(23);
  for (int i = 0; i < 50; ++i) {
    const Vector a = o.random_direction(rng), b = o.random_direction(rng);
    std::uniform_real_distribution<double> u(0.0, 8.0);
    const double ta = u(rng), tb = u(rng);
    const Point pa = o.ray_point(a, ta), pb = o.ray_point(b, tb);
    const double d1 = o.factor_distance(0, pa.parts[0], pb.parts[0]);
    const double d2 = std::abs(ta * a(2) - tb * b(2));
    CHECK(o.distance(pa, pb) == doctest::Approx(std::hypot(d1, d2)).epsilon(1e-12));
    // Factor 0 against the standalone H^2 oracle with hyperboloid inner products.
    const Vector ea = o.embed(pa).head(2), eb = o.embed(pb).head(2);
    const double x0a = std::sqrt(1 + ea.squaredNorm()), x0b = std::sqrt(1 + eb.squaredNorm());
    CHECK(d1 == doctest::Approx(std::acosh(std::max(1.0, x0a * x0b - ea.dot(eb)))).epsilon(1e-7));
  }
}

TEST_CASE("distance oracle invariants on random triples") {
  for (std::string spec : {"h2", "h3", "flat2", "flat3", "h2xr", "h2:-4"}) {
    CAPTURE(spec);
    const Model m = build_model(parse_model_spec(spec));
    const DistanceOracle& o = *m.distance_oracle();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> rad(0.0, 32.0);
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
      const Point a = o.ray_point(o.random_direction(rng), rad(rng));
      const Point b = o.ray_point(o.random_direction(rng), rad(rng));
      const Point c = o.ray_point(o.random_direction(rng), rad(rng));
      const double ab = o.distance(a, b), bc = o.distance(b, c), ac = o.distance(a, c);
      if (ab != o.distance(b, a)) ++violations;
      if (ac > (ab + bc) * (1 + 1e-9) + 1e-12) ++violations;
    }
    CHECK(violations == 0);

    std::uniform_real_distribution<double> tt(-6.0, 6.0);
    for (int i = 0; i < 200; ++i) {
      // Polar coordinates resolve a point at scaled radius rho only to about
      // eps * e^rho, so the base point stays at moderate radius.
      const Point p = o.ray_point(o.random_direction(rng), 0.5 * std::abs(tt(rng)));
      const double t = tt(rng);
      const Point q = o.geodesic_point(p, o.random_direction(rng), t);
      CHECK(o.distance(p, q) == doctest::Approx(std::abs(t)).epsilon(1e-8));
    }
  }
}

TEST_CASE("horosphere ball volume") {
  const Model h2 = build_model(parse_model_spec("h2"));
  CHECK(*h2.distance_oracle()->horosphere_ball_volume(2.0) == doctest::Approx(4.0 * std::sinh(1.0)));
  const Model h3 = build_model(parse_model_spec("h3"));
  CHECK(*h3.distance_oracle()->horosphere_ball_volume(2.0) ==
        doctest::Approx(std::numbers::pi * std::pow(2.0 * std::sinh(1.0), 2)));
  CHECK(!build_model(parse_model_spec("h2xr")).distance_oracle()->horosphere_ball_volume(1.0));
}

TEST_CASE("closed-form densities") {
  const Model tb = build_model(parse_model_spec("twoblock21"));
  CHECK(*tb.log_density(1.0) == doctest::Approx(2 * std::log(std::sinh(1.0)) + std::log(std::sinh(2.0) / 2)));
  const Model dr = build_model(parse_model_spec("dr:2,1"));
  CHECK(*dr.log_density(1.3) == doctest::Approx(*tb.log_density(1.3)).epsilon(1e-14));
  CHECK(!build_model(parse_model_spec("h2xr")).log_density(1.0));
}
