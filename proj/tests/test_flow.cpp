#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "pcrtbp/charts.hpp"
#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"
#include "pcrtbp/flow.hpp"
#include "pcrtbp/propagate.hpp"

using namespace pcrtbp;

namespace {

IntegratorConfig tight() {
  IntegratorConfig ic;
  ic.rel_tol = ic.abs_tol = 1e-13;
  return ic;
}

double cart_gap(const Cartesian& a, const Cartesian& b) {
  return std::max({std::abs(a.q1 - b.q1), std::abs(a.q2 - b.q2), std::abs(a.p1 - b.p1), std::abs(a.p2 - b.p2)});
}

}  // namespace

TEST_CASE("stepper: harmonic oscillator and dense output") {
  Dop853 rk(2, [](double, const double* y, double* dy) {
    dy[0] = y[1];
    dy[1] = -y[0];
  }, 1e-12, 1e-12);
  const double y0[2] = {1.0, 0.0};
  rk.reset(0.0, y0);
  double worst_dense = 0.0;
  while (rk.t() < 20.0) {
    REQUIRE(rk.step(20.0, 0.7));
    rk.prepare_dense();
    const double tm = 0.5 * (rk.t_old() + rk.t());
    double y[2];
    rk.dense(tm, y);
    worst_dense = std::max(worst_dense, std::abs(y[0] - std::cos(tm)));
  }
  CHECK(rk.t() == 20.0);
  CHECK(std::abs(rk.y()[0] - std::cos(20.0)) < 1e-10);
  CHECK(std::abs(rk.y()[1] + std::sin(20.0)) < 1e-10);
  CHECK(worst_dense < 1e-10);
  CHECK(rk.accepted() > 0);
}

TEST_CASE("events are located on the dense output") {
  const double mu = 1e-3;
  const Cartesian c{0.6, 0.0, 0.0, 0.7};
  std::vector<EventSpec> evs{{"q2_up", [](double, const double* y) { return y[1]; }, +1, false, 0},
                             {"stop", [](double, const double* y) { return y[1]; }, -1, true, 2}};
  const Trajectory tr = integrate(FieldId::Cartesian, tag(c), 0.0, 200.0, mu, 0.0, tight(), evs);
  REQUIRE(tr.status == FlowStatus::TerminalEvent);
  int up = 0, down = 0;
  for (const EventHit& e : tr.events) {
    CHECK(std::abs(e.y[1]) < 1e-11);
    if (e.id == "q2_up") {
      ++up;
      CHECK(e.direction == +1);
    } else {
      ++down;
    }
  }
  CHECK(down == 2);
  CHECK(up >= 1);
  CHECK(tr.times.back() == doctest::Approx(tr.events.back().time).epsilon(1e-14));
}

TEST_CASE("first-integral drift stays below 1e-9 per 10 time units") {
  const double mu = 1e-3;
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> ur(0.3, 2.0), ua(-pi, pi);
  for (int i = 0; i < 6; ++i) {
    const double r = ur(g), a = ua(g);
    // circular Kepler speed about the Sun; p is the inertial velocity in the rotating basis
    const double vc = std::sqrt((1 - mu) / r);
    const Cartesian c{-mu + r * std::cos(a), r * std::sin(a), -vc * std::sin(a), vc * std::cos(a)};
    const Trajectory tr = integrate(FieldId::Cartesian, tag(c), 0.0, 10.0, mu, 0.0, IntegratorConfig{});
    if (tr.status != FlowStatus::Completed) continue;
    CHECK(tr.max_abs_drift() < 1e-9);
  }
  // same check across the other time charts
  const Cartesian c{0.5, 0.0, 0.0, 0.9};
  const double h = hamiltonian(c, mu);
  for (Chart ch : {Chart::PolarCM, Chart::PolarP1, Chart::Infinity}) {
    const Trajectory tr = integrate(field_for_chart(ch), convert(tag(c), ch, mu, h), 0.0, 10.0, mu, h, IntegratorConfig{});
    REQUIRE(tr.status == FlowStatus::Completed);
    CHECK(tr.max_abs_drift() < 1e-9);
  }
}

TEST_CASE("time reversal conjugates the flow") {
  const double mu = 1e-3;
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> ur(0.3, 2.0), ua(-pi, pi), ue(0.9, 1.1);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    // eccentric prograde orbits that stay clear of both primaries; close approaches are covered below
    const double r = ur(g), a = ua(g), vt = ue(g) * std::sqrt((1 - mu) / r);
    const Cartesian c{-mu + r * std::cos(a), r * std::sin(a), -vt * std::sin(a), vt * std::cos(a)};
    const Trajectory fw = integrate(FieldId::Cartesian, tag(c), 0.0, 5.0, mu, 0.0, tight());
    if (fw.status != FlowStatus::Completed) continue;
    // phi_t(R x) = R phi_{-t}(x): run the reflected end point forward and land on the reflected start
    const Cartesian end = as_cartesian(fw.final_state(), mu, 0.0);
    const Trajectory bw = integrate(FieldId::Cartesian, tag(reflect(end)), 0.0, 5.0, mu, 0.0, tight());
    REQUIRE(bw.status == FlowStatus::Completed);
    worst = std::max(worst, cart_gap(as_cartesian(bw.final_state(), mu, 0.0), reflect(c)));
  }
  CHECK(worst < 1e-10);

  // the same in the regularized chart through a near-collision passage
  const CollisionState c0 = to_collision(Polar{Center::P1, 0.04, 0.3, -1.0, 0.01}, mu);
  const double h = hamiltonian(c0, mu);
  const Trajectory fw = integrate(FieldId::Regularized, tag(c0), 0.0, 3.0, mu, h, tight());
  REQUIRE(fw.status == FlowStatus::Completed);
  const CollisionState e = as_collision(fw.final_state(), mu, h);
  const Trajectory bw = integrate(FieldId::Regularized, tag(reflect(e)), 0.0, 3.0, mu, h, tight());
  const CollisionState back = reflect(as_collision(bw.final_state(), mu, h));
  CHECK(std::abs(back.r - c0.r) < 1e-10);
  CHECK(std::abs(wrap_pi(back.theta - c0.theta)) < 1e-10);
  CHECK(std::abs(back.v - c0.v) < 1e-10);
  CHECK(std::abs(back.u - c0.u) < 1e-10);
}

TEST_CASE("collision passage in the reduced chart") {
  const double mu = 1e-3, delta = 0.2;
  // a glancing pass returns to s = delta; a radial one is captured
  const ReducedState glance = make_reduced(delta, 0.5, -1.2, mu, 0.0);
  const Trajectory a = integrate_through_collision(glance, mu, 0.0, delta, tight());
  REQUIRE(a.status == FlowStatus::TerminalEvent);
  CHECK(a.final_state().x[0] == doctest::Approx(delta).epsilon(1e-12));
  CHECK(a.s_min > 0.0);
  CHECK(a.s_min < delta);
  CHECK(a.max_abs_drift() < 1e-9);
  // started next to S-, the orbit follows its stable fiber into the collision
  const ReducedState radial = make_reduced(1e-6, 0.5, -pi / 2, mu, 0.0);
  const Trajectory b = integrate_through_collision(radial, mu, 0.0, delta, tight());
  CHECK(b.status == FlowStatus::Collision);
  CHECK(b.s_min < collision_floor * 1.0001);
  CHECK_THROWS_AS(integrate_through_collision(make_reduced(0.5, 0.0, 0.0, mu, 0.0), mu, 0.0, delta, tight()),
                  DomainError);
}

TEST_CASE("hybrid propagation follows the orbit across charts") {
  const double mu = 1e-3, h = -1.5;
  // start on the outgoing section, go out and come back to the incoming one
  const ReducedState st = make_reduced(0.2, 0.4, 1.4, mu, h);
  HybridConfig hc;
  hc.integ = tight();
  hc.record = true;
  const HybridResult r = propagate(tag(st), 0.0, +1, mu, h, hc, -1, 1);
  REQUIRE(r.status == HybridStatus::SectionReached);
  CHECK(r.hits.back().R_sign == -1);
  CHECK(r.hits.back().red.s == 0.2);
  CHECK(r.energy_error < 1e-9);
  CHECK(r.switches >= 2);
  CHECK(r.t_final > 0.0);
  CHECK(std::is_sorted(r.samples.begin(), r.samples.end(),
                       [](const HybridSample& a, const HybridSample& b) { return a.t < b.t; }));
  // the samples match an independent Cartesian integration where both are defined
  const HybridSample& mid = r.samples[r.samples.size() / 2];
  const Trajectory ref = integrate(FieldId::Cartesian, tag(as_cartesian(tag(st), mu, h)), 0.0, mid.t, mu, h, tight());
  CHECK(cart_gap(as_cartesian(ref.final_state(), mu, h), mid.q) < 1e-7);
  CHECK_THROWS_AS(propagate(tag(st), 0.0, 0, mu, h, hc, -1), ConfigError);
}

TEST_CASE("trajectory CSV layout") {
  const Trajectory tr = integrate(FieldId::Cartesian, tag(Cartesian{0.5, 0, 0, 0.9}), 0.0, 1.0, 1e-3, 0.0, {});
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  std::istringstream in(os.str());
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "t,q1,q2,p1,p2,drift");
  CHECK(first == "0,0.5,0,0,0.90000000000000002,0");
  IntegratorConfig bad;
  bad.rel_tol = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}
