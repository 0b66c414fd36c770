#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "harmonic_rank/errors.hpp"
#include "harmonic_rank/flow.hpp"

#include <cmath>
#include <random>

using namespace hrank;

namespace {

Model model(const std::string& text) { return build_model(parse_model_spec(text)); }

SasakiVector sv(std::initializer_list<double> x, double lambda, std::initializer_list<double> y) {
  SasakiVector out;
  out.x = Vector::Map(std::data(x), static_cast<Eigen::Index>(x.size()));
  out.lambda = lambda;
  out.y = Vector::Map(std::data(y), static_cast<Eigen::Index>(y.size()));
  return out;
}

double distance(const SasakiVector& a, const SasakiVector& b) { return (a.stacked() - b.stacked()).norm(); }

}  // namespace

TEST_CASE("flow derivative closed forms") {
  const Model h2 = model("h2");
  const auto s = flow_derivative(h2, h2.default_seed(), sv({1.0}, 0.0, {-1.0}), 3.0);
  CHECK(s.norm() == doctest::Approx(std::exp(-3.0) * std::sqrt(2.0)).epsilon(1e-6));
  CHECK(flow_derivative(h2, h2.default_seed(), sv({0.0}, 1.0, {0.0}), 7.0).norm() == doctest::Approx(1.0));

  const Model f2 = model("flat2");
  const auto p = flow_derivative(f2, f2.default_seed(), sv({0.6}, 0.0, {0.0}), 5.0);
  CHECK(distance(p, sv({0.6}, 0.0, {0.0})) < 1e-10);
  const auto q = flow_derivative(f2, f2.default_seed(), sv({0.0}, 0.0, {1.0}), 5.0);
  CHECK(distance(q, sv({5.0}, 0.0, {1.0})) < 1e-8);
}

TEST_CASE("flow derivative matches direct Jacobi integration") {
  for (const char* name : {"synthetic:sin", "twoblock21", "h2xr", "dr:4,1"}) {
    CAPTURE(std::string(name));
    const Model m = model(name);
    const FieldPtr f = m.field(m.default_seed());
    const int n = f->dim_normal();
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    SasakiVector xi{Vector(n), normal(rng), Vector(n)};
    for (int i = 0; i < n; ++i) {
      xi.x(i) = normal(rng);
      xi.y(i) = normal(rng);
    }
    const FlowContext ctx(f, 4.0);
    for (double t : {-2.5, 1.0, 3.0}) {
      const auto a = fundamental_A(f, merge_grids({0.0}, {t}));
      const auto d = fundamental_D(f, merge_grids({0.0}, {t}));
      const std::size_t i = a.index_of(t);
      const Vector j = d.value(i) * xi.x + a.value(i) * xi.y;
      const Vector jp = d.derivative(i) * xi.x + a.derivative(i) * xi.y;
      const SasakiVector got = ctx.apply(xi, t);
      CHECK((got.x - j).norm() < 1e-8 * std::max(1.0, j.norm()));
      CHECK((got.y - jp).norm() < 1e-8 * std::max(1.0, jp.norm()));
      CHECK(got.lambda == xi.lambda);
    }
  }
}

TEST_CASE("flow cocycle") {
  const Model m = model("synthetic:sin");
  const FieldPtr f = m.field(m.default_seed());
  const FlowContext base(f, 6.0);
  const SasakiVector xi = sv({0.3}, 0.5, {-0.8});
  for (auto [t, s] : {std::pair{1.5, 2.0}, std::pair{-2.0, 3.5}, std::pair{2.5, -1.0}}) {
    const FlowContext shifted(shift_field(f, t), 6.0);
    const auto lhs = base.apply(xi, t + s);
    const auto rhs = shifted.apply(base.apply(xi, t), s);
    CHECK(distance(lhs, rhs) < 1e-7 * std::max(1.0, lhs.norm()));
  }
}

TEST_CASE("splitting dimensions") {
  struct Case {
    const char* name;
    int ec, es;
  };
  for (const auto& c : {Case{"h3", 1, 2}, Case{"flat2", 3, 0}, Case{"h2xr", 3, 1}, Case{"twoblock21", 1, 3},
                        Case{"flat3", 5, 0}}) {
    CAPTURE(std::string(c.name));
    const Model m = model(c.name);
    const auto f = build_splitting(m, m.default_seed());
    CHECK(f.Ec.cols() == c.ec);
    CHECK(f.Es.cols() == c.es);
    CHECK(f.Eu.cols() == c.es);
    CHECK(f.Ec.cols() == 2 * f.rank - 1);
    CHECK(f.Ec.cols() + f.Es.cols() + f.Eu.cols() == 2 * m.dim() - 1);
    CHECK(f.stacked_rank == 2 * m.dim() - 1);
    CHECK(f.Ep.cols() == f.rank);
  }
}

TEST_CASE("exponent fits") {
  const Model h2 = model("h2");
  const auto fs = exponent_fit(h2, h2.default_seed(), Subspace::Stable, 10.0, 8);
  CHECK(fs.alpha >= 0.98);
  CHECK(fs.alpha <= 1.02);
  const auto fu = exponent_fit(h2, h2.default_seed(), Subspace::Unstable, 10.0, 8);
  CHECK(fu.alpha == doctest::Approx(1.0).epsilon(0.02));

  const Model tb = model("twoblock21");
  const auto ft = exponent_fit(tb, tb.default_seed(), Subspace::Stable, 10.0, 8);
  REQUIRE(ft.per_direction.size() == 3);
  std::vector<double> rates = ft.per_direction;
  std::sort(rates.begin(), rates.end());
  CHECK(std::abs(rates[0] - 1.0) < 0.02);
  CHECK(std::abs(rates[1] - 1.0) < 0.02);
  CHECK(std::abs(rates[2] - 2.0) < 0.02);
  CHECK(ft.alpha == doctest::Approx(1.0).epsilon(0.02));

  const Model p = model("h2xr");
  const auto fc = exponent_fit(p, p.default_seed(), Subspace::Central, 10.0, 16);
  CHECK(fc.a < 2.0);
  CHECK(fc.a >= 1.0 - 1e-9);

  CHECK_THROWS_AS(exponent_fit(model("flat2"), model("flat2").default_seed(), Subspace::Stable, 5.0, 2), Error);
}

TEST_CASE("exponential estimates on rank-one models") {
  for (const char* name : {"h2", "h3", "twoblock21", "synthetic:sin"}) {
    CAPTURE(std::string(name));
    const Model m = model(name);
    const FlowContext ctx(m.field(m.default_seed()), 10.0);
    const auto frame = ctx.splitting();
    for (Subspace which : {Subspace::Stable, Subspace::Unstable}) {
      const auto fit = exponent_fit(ctx, which, 10.0, 6, 9);
      CHECK(fit.alpha > 0.5);
      CHECK(fit.a >= 1.0);
      CHECK(fit.a < 10.0);
      const Matrix& basis = which == Subspace::Stable ? frame.Es : frame.Eu;
      std::mt19937_64 rng(2);
      std::normal_distribution<double> normal;
      for (int k = 0; k < 5; ++k) {
        Vector c(basis.cols());
        for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = normal(rng);
        const auto xi = SasakiVector::from_stacked(basis * c.normalized());
        for (double t = 0.0; t <= 10.0; t += 0.5) {
          const double r = ctx.apply(xi, t).norm() / xi.norm();
          if (which == Subspace::Stable)
            CHECK(r <= fit.a * std::exp(-fit.alpha * t) * (1 + 1e-9));
          else
            CHECK(r >= std::exp(fit.alpha * t) / fit.a * (1 - 1e-9));
        }
      }
    }
  }
}

TEST_CASE("subspace invariance") {
  for (const char* name : {"h2", "twoblock21", "synthetic:sin", "h2xr", "dr:4,1"}) {
    CAPTURE(std::string(name));
    const Model m = model(name);
    const FlowContext ctx(m.field(m.default_seed()), 6.0);
    for (double t : {-4.0, 1.0, 5.0}) {
      CHECK(invariance_angle(ctx, Subspace::Stable, t) < 1e-6);
      CHECK(invariance_angle(ctx, Subspace::Unstable, t) < 1e-6);
    }
  }
}

TEST_CASE("parallel fields") {
  const Model p = model("h2xr");
  const Matrix k = parallel_field_detect(p, p.default_seed(), 5.0);
  REQUIRE(k.cols() == 1);
  const RankReport r = rank_of(p, p.default_seed());
  CHECK(max_principal_angle(k, r.kernel_basis()) < 1e-8);
  CHECK(parallel_field_detect(model("h3"), model("h3").default_seed(), 5.0).cols() == 0);
  CHECK(parallel_field_detect(model("flat3"), model("flat3").default_seed(), 5.0).cols() == 2);
  const Model mixed = model("h2xr");
  CHECK(parallel_field_detect(mixed, Direction(Vector(Eigen::Vector3d(1, 1, 1))), 5.0).cols() == 1);
}

TEST_CASE("linear growth along kernel directions") {
  const Model f2 = model("flat2");
  const auto rf = linear_growth_check(f2, f2.default_seed(), Vector::Ones(1), {1.0, 7.0});
  CHECK(rf.residual < 1e-10);
  CHECK(rf.pass);
  const Model p = model("h2xr");
  const RankReport r = rank_of(p, p.default_seed());
  const auto rp = linear_growth_check(p, p.default_seed(), r.kernel_basis().col(0), uniform_grid(1.0, 10.0, 1.0));
  CHECK(rp.residual < 1e-6);
  CHECK(rp.pass);
  CHECK_THROWS_AS(linear_growth_check(model("h2"), model("h2").default_seed(), Vector::Ones(1), {1.0}), Error);
}
