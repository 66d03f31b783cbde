#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"
#include "pcrtbp/localmap.hpp"

using namespace pcrtbp;

TEST_CASE("leading-order straightening inverts") {
  const double mu = 1e-3, h = 0.0;
  for (Side side : {Side::Minus, Side::Plus})
    for (double al : {-2.0, -1.0, 0.5, 1.4}) {
      const ReducedState p = make_reduced(0.1, 0.7, al, mu, h);
      const StraightenedPoint q = straighten_leading(p, side, mu);
      const ReducedState back = unstraighten_leading(q, mu, h);
      CHECK(back.s == p.s);
      CHECK(std::abs(wrap_pi(back.theta - p.theta)) < 1e-14);
      CHECK(std::abs(wrap_pi(back.alpha - p.alpha)) < 1e-14);
    }
  // S- itself has beta~ = 0 at s = 0
  CHECK(straighten_leading(make_reduced(0.0, 0.2, -pi / 2, mu, h), Side::Minus, mu).b == 0.0);
}

TEST_CASE("section straightener charts") {
  const double mu = 1e-3, h = 0.0, delta = 0.1;
  const SectionStraightener minus(Side::Minus, mu, h, delta, {}), plus(Side::Plus, mu, h, delta, {});
  for (const SectionStraightener* st : {&minus, &plus})
    for (double b : {-0.02, 0.0, 0.005})
      for (double c : {-1.0, 2.0}) {
        const StraightenedPoint q = st->to_straightened(st->from_straightened(b, c));
        CHECK(q.b == doctest::Approx(b).epsilon(1e-9).scale(1.0));
        CHECK(std::abs(wrap_pi(q.c - c)) < 1e-9);
      }
  // the collision manifolds are the coordinate axes
  const CollisionTrace s = trace_collision_manifold(FiberSeed{-1, 0.4, 1e-4}, mu, SectionSpec{delta, h, -1}, {}, true);
  REQUIRE(s.ok);
  CHECK(std::abs(minus.to_straightened(s.red).b) < 1e-9);
  const CollisionTrace u = trace_collision_manifold(FiberSeed{+1, 0.4, 1e-4}, mu, SectionSpec{delta, h, +1}, {}, true);
  REQUIRE(u.ok);
  CHECK(std::abs(plus.to_straightened(u.red).b) < 1e-9);
  CHECK_THROWS_AS(minus.to_straightened(make_reduced(0.2, 0.0, 0.0, mu, h)), DomainError);
}

TEST_CASE("transition estimates at delta = 0.1") {
  const double delta = 0.1, mu = 1e-3, h = 0.0;
  const TransitReport r = verify_transition_estimates(delta, default_nu_grid(delta), mu, h);
  REQUIRE(r.rows.size() == 13);
  CHECK(r.rows.front().nu == doctest::Approx(1e-5));
  CHECK(r.rows.back().nu == doctest::Approx(1e-2));
  for (const TransitResult& t : r.rows) {
    CHECK(t.ok);
    CHECK(t.ordered);
    CHECK(std::abs(t.out.b + t.nu) <= 5 * delta * t.nu);
    CHECK(std::abs(t.out.c - t.z_in) <= 5 * (delta * delta * t.nu + t.nu * t.nu));
    CHECK(t.energy_residual < 1e-9);
    CHECK(t.s_min < t.nu);
  }
  CHECK(r.C1 <= 5.0);
  CHECK(r.C2 <= 5.0);
  CHECK(r.limit_error < 1e-6);
  CHECK(r.monotone);
  CHECK(r.iota_slope == doctest::Approx(-1.0).epsilon(1e-3));
  const auto j = nlohmann::json::parse(transit_report_json(r));
  CHECK(j["rows"].size() == 13);
  std::ostringstream os;
  write_transit_csv(os, r);
  CHECK(os.str().rfind("nu,", 0) == 0);
}

TEST_CASE("transition map along a sloped input curve and with nu < 0") {
  const double delta = 0.1, mu = 1e-3, h = 0.0;
  const TransitReport r = verify_transition_estimates(delta, default_nu_grid(delta, 5), mu, h, 0.3, 0.5);
  CHECK(r.C1 <= 5.0);
  CHECK(r.C2 <= 5.0);
  const SectionStraightener minus(Side::Minus, mu, h, delta, {}), plus(Side::Plus, mu, h, delta, {});
  const TransitResult neg = transit(-1e-3, 0.2, minus, plus);
  REQUIRE(neg.ok);
  CHECK(std::abs(neg.out.b - 1e-3) <= 5 * delta * 1e-3);
  const TransitResult zero = transit(0.0, 0.2, minus, plus);
  CHECK(zero.extended);
  CHECK(zero.out.b == 0.0);
  CHECK(zero.out.c == 0.2);
  CHECK_THROWS_AS(transit(0.2, 0.0, minus, plus), DomainError);
  CHECK_THROWS_AS(transit(1e-9, 0.0, minus, plus), DomainError);
  CHECK_THROWS_AS(transit(1e-3, 0.0, plus, minus), ConfigError);
}
