#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pcrtbp/charts.hpp"
#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"
#include "pcrtbp/fields.hpp"

using namespace pcrtbp;

namespace {

Cartesian sample(std::mt19937_64& g, double mu, double rmin, double rmax) {
  std::uniform_real_distribution<double> ur(rmin, rmax), ua(-pi, pi), up(-1.5, 1.5);
  for (;;) {
    const double r = ur(g), a = ua(g);
    Cartesian c{-mu + r * std::cos(a), r * std::sin(a), up(g), up(g)};
    if (std::hypot(c.q1 - (1 - mu), c.q2) > 0.1) return c;
  }
}

}  // namespace

TEST_CASE("every chart field is the push-forward of the Cartesian field") {
  std::mt19937_64 g(21);
  const double mu = 1e-3;
  int conclusive = 0;
  for (int i = 0; i < 200; ++i) {
    const Cartesian c = sample(g, mu, 0.05, 4.0);
    const double h = hamiltonian(c, mu);
    const ChartState cs = tag(c);
    for (FieldId b : {FieldId::PolarCM, FieldId::PolarP1, FieldId::Infinity, FieldId::Regularized, FieldId::Reduced}) {
      const ConsistencyResult r = consistency_check(FieldId::Cartesian, b, cs, mu, h);
      if (r.inconclusive) continue;
      ++conclusive;
      const Vec4 fb = eval_field(b, convert(cs, field_chart(b), mu, h).x, mu, h);
      const double scale = std::max({1.0, std::abs(fb[0]), std::abs(fb[1]), std::abs(fb[2]), std::abs(fb[3])});
      CHECK(r.max_deviation / scale < 1e-6);
    }
  }
  CHECK(conclusive > 900);
}

TEST_CASE("fields agree pairwise away from Cartesian too") {
  const double mu = 0.01;
  const Cartesian c{0.15, -0.12, 0.9, 1.4};
  const double h = hamiltonian(c, mu);
  const ChartState p1 = convert(tag(c), Chart::PolarP1, mu, h);
  for (FieldId b : {FieldId::Regularized, FieldId::Reduced, FieldId::PolarCM}) {
    const ConsistencyResult r = consistency_check(FieldId::PolarP1, b, p1, mu, h);
    REQUIRE_FALSE(r.inconclusive);
    CHECK(r.max_deviation < 1e-6);
  }
  const ChartState inf = convert(tag(c), Chart::Infinity, mu, h);
  CHECK(consistency_check(FieldId::Infinity, FieldId::PolarCM, inf, mu, h).max_deviation < 1e-6);
}

TEST_CASE("first integrals are constant along the fields") {
  std::mt19937_64 g(5);
  const double mu = 1e-3, eps = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Cartesian c = sample(g, mu, 0.05, 3.0);
    const double h = hamiltonian(c, mu);
    // H along the Cartesian field
    const Vec4 f = eval_field(FieldId::Cartesian, {c.q1, c.q2, c.p1, c.p2}, mu);
    ChartState a = tag(c), b = tag(c);
    for (int k = 0; k < 4; ++k) {
      a.x[k] += eps * f[k];
      b.x[k] -= eps * f[k];
    }
    const double dH = (eval_integral(IntegralId::H_hat, a, mu, h) - eval_integral(IntegralId::H_hat, b, mu, h)) / (2 * eps);
    CHECK(std::abs(dH) < 1e-6);
    // M~ along the regularized field
    ChartState r = convert(tag(c), Chart::Regularized, mu, h);
    const Vec4 fr = eval_field(FieldId::Regularized, r.x, mu, h);
    ChartState ra = r, rb = r;
    for (int k = 0; k < 4; ++k) {
      ra.x[k] += eps * fr[k];
      rb.x[k] -= eps * fr[k];
    }
    const double dM = (eval_integral(IntegralId::M_tilde, ra, mu, h) - eval_integral(IntegralId::M_tilde, rb, mu, h)) / (2 * eps);
    CHECK(std::abs(dM) < 1e-6);
    CHECK(std::abs(eval_integral(IntegralId::M_tilde, r, mu, h)) < 1e-12);
  }
}

TEST_CASE("reduced field restricts to the collision torus field at s = 0") {
  const double mu = 1e-3;
  for (double th : {-2.0, 0.0, 1.0})
    for (double al : {-1.2, -0.3, 0.0, 0.8, 1.5}) {
      const Vec4 red = eval_field(FieldId::Reduced, {0.0, th, al, 0.0}, mu, 0.0);
      const Vec4 tor = eval_field(FieldId::CollisionTorus, {th, al, 0.0, 0.0}, mu);
      CHECK(red[0] == 0.0);
      CHECK(red[1] == doctest::Approx(tor[0]).epsilon(1e-14));
      CHECK(red[2] == doctest::Approx(tor[1]).epsilon(1e-14));
    }
  // the equilibria S+- sit at alpha = +-pi/2
  const Vec4 e = eval_field(FieldId::CollisionTorus, {0.4, pi / 2, 0, 0}, mu);
  CHECK(std::abs(e[0]) < 1e-15);
  CHECK(std::abs(e[1]) < 1e-15);
}

TEST_CASE("straightened fields keep their invariant sets") {
  const double mu = 1e-3, h = 0.0;
  const Vec4 m = eval_field(FieldId::StraightenedMinus, {0.1, 0.0, 0.3, 0.0}, mu, h);
  CHECK(m[1] == 0.0);  // W^s(S-) = {beta~ = 0}
  CHECK(m[0] == doctest::Approx(-0.5 * m0_of(mu) * 0.1));
  const Vec4 p = eval_field(FieldId::StraightenedPlus, {0.1, 0.0, 0.3, 0.0}, mu, h);
  CHECK(p[1] == 0.0);
  CHECK_THROWS_AS(eval_field(FieldId::StraightenedMinus, {-0.1, 0.0, 0.0, 0.0}, mu, h), DomainError);
}

TEST_CASE("field metadata") {
  CHECK(field_dim(FieldId::Reduced) == 3);
  CHECK(field_dim(FieldId::CollisionTorus) == 2);
  CHECK(field_uses_tau(FieldId::Regularized));
  CHECK_FALSE(field_uses_tau(FieldId::Infinity));
  CHECK(time_factor(FieldId::Regularized, {0.04, 0, 0, 0}) == doctest::Approx(0.008));
  CHECK(time_factor(FieldId::Reduced, {0.2, 0, 0, 0}) == doctest::Approx(0.008));
  CHECK_THROWS_AS(field_chart(FieldId::CollisionTorus), DomainError);
  for (Chart c : {Chart::Cartesian, Chart::PolarCM, Chart::PolarP1, Chart::Infinity, Chart::Regularized, Chart::Reduced})
    CHECK(field_chart(field_for_chart(c)) == c);
  CHECK_THROWS_AS(eval_field(FieldId::Cartesian, {-1e-3, 0, 0, 0}, 1e-3), SingularChartError);
}
