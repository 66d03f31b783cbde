#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"
#include "pcrtbp/melnikov.hpp"
#include "pcrtbp/search.hpp"

using namespace pcrtbp;

namespace {

MotionTrace polar_orbit(double r, double R, double Theta, double t1) {
  IntegratorConfig ic;
  ic.rel_tol = ic.abs_tol = 1e-11;
  const Trajectory tr = integrate(FieldId::PolarCM, tag(Polar{Center::CM, r, 0.0, R, Theta}), 0.0, t1, 0.0,
                                  0.0, ic);
  REQUIRE(tr.status == FlowStatus::Completed);
  return motion_trace(tr);
}

MotionTrace synthetic(const std::vector<double>& radii) {
  MotionTrace m;
  for (std::size_t i = 0; i < radii.size(); ++i) m.samples.push_back({double(i), radii[i], 0.0});
  return m;
}

// One search shared by the ECO cases; it is the expensive part of this file.
const EcoSearch& default_search() {
  static const EcoSearch s = [] {
    EcoSearchConfig cfg;
    cfg.record = true;
    return find_ecos(1e-3, 0.0, 3, cfg);
  }();
  return s;
}

}  // namespace

TEST_CASE("final motions of Kepler orbits") {
  // mu = 0: the Kepler energy is h + Theta
  CHECK(classify_final_motion(polar_orbit(2.0, 1.5, 0.0, 500.0), 1e9) == FinalMotion::H);
  // zero Kepler energy with angular momentum 1
  CHECK(classify_final_motion(polar_orbit(2.0, std::sqrt(0.75), 1.0, 2e5), 1e9) == FinalMotion::P);
  // circular about the centre of mass
  CHECK(classify_final_motion(polar_orbit(2.0, 0.0, std::sqrt(2.0), 200.0), 1e9) == FinalMotion::B);
  // an escape cut off early looks bounded
  CHECK(classify_final_motion(polar_orbit(2.0, 1.5, 0.0, 500.0), 10.0) == FinalMotion::B);
}

TEST_CASE("final motions of synthetic traces") {
  CHECK(classify_final_motion(synthetic({1, 60, 3, 70, 2, 80, 10}), 1e9) == FinalMotion::OS);
  CHECK(classify_final_motion(synthetic({1, 60, 3, 20}), 1e9) == FinalMotion::UNDECIDED);
  MotionTrace c = synthetic({1, 2});
  c.collided = true;
  CHECK(classify_final_motion(c, 1e9) == FinalMotion::COLLISION);
  CHECK(classify_final_motion(MotionTrace{}, 1e9) == FinalMotion::UNDECIDED);
  CHECK(std::string(final_motion_name(FinalMotion::OS)) == "OS");
}

TEST_CASE("ejection-collision orbits with growing excursions") {
  const EcoSearch& s = default_search();
  REQUIRE(s.orbits.size() >= 2);
  for (std::size_t i = 0; i < s.orbits.size(); ++i) {
    const EcoOrbit& e = s.orbits[i];
    CHECK(e.k == int(i) + 1);
    CHECK(std::abs(e.residual) < 1e-8);
    CHECK(e.end_error < 1e-4);
    CHECK(e.energy_error < 1e-9);
    CHECK(e.r_max > 100.0);
    if (i > 0) {
      CHECK(e.r_max > s.orbits[i - 1].r_max + 1.0);
      CHECK(e.t_flight > s.orbits[i - 1].t_flight);
    }
    CHECK_FALSE(e.trajectory.empty());
  }
  const auto j = nlohmann::json::parse(eco_search_json(s));
  CHECK(j["orbits"].size() == s.orbits.size());
  CHECK(j["orbits"][0]["crossing"] == "first return to the incoming section");
}

TEST_CASE("an ECO collides in both time directions") {
  const EcoOrbit& e = default_search().orbits.front();
  const double horizon = 2 * e.t_flight + 100;
  CHECK(classify_final_motion(eco_motion_trace(e, -1), horizon) == FinalMotion::COLLISION);
  CHECK(classify_final_motion(eco_motion_trace(e, +1), horizon) == FinalMotion::COLLISION);
}

TEST_CASE("reflected ECO segments retrace the orbit backwards") {
  // the end-to-end mirror is too ill-conditioned (~1e-4) over the long excursion, so check it on segments
  const EcoOrbit& e = default_search().orbits.front();
  const std::vector<HybridSample>& tr = e.trajectory;
  auto middle = [&](const HybridSample& x) {
    return x.chart == Chart::PolarCM && std::hypot(x.q.q1 + e.mu, x.q.q2) > 0.5;
  };
  int checked = 0;
  double last = -1e9;
  for (std::size_t i = 0; i + 1 < tr.size() && checked < 5; ++i) {
    if (!middle(tr[i]) || tr[i].t < last + 5.0) continue;
    std::size_t j = i;
    while (j + 1 < tr.size() && tr[j + 1].t - tr[i].t < 5.0 && middle(tr[j + 1])) ++j;
    if (j == i) continue;
    last = tr[i].t;
    IntegratorConfig ic;
    ic.rel_tol = ic.abs_tol = 1e-13;
    const Trajectory back = integrate(FieldId::Cartesian, tag(reflect(tr[j].q)), 0.0, tr[j].t - tr[i].t, e.mu, e.h, ic);
    REQUIRE(back.status == FlowStatus::Completed);
    const Cartesian got = reflect(as_cartesian(back.final_state(), e.mu, e.h));
    const Cartesian& want = tr[i].q;
    const double gap = std::max({std::abs(got.q1 - want.q1), std::abs(got.q2 - want.q2), std::abs(got.p1 - want.p1),
                                 std::abs(got.p2 - want.p2)});
    CHECK(gap < 1e-9);
    ++checked;
  }
  CHECK(checked >= 3);
}

TEST_CASE("ECO search in a single window") {
  EcoSearchConfig cfg;
  const EcoSearch& s = default_search();
  const EcoOrbit& e = s.orbits.front();
  const double w = 1e-6;
  const std::vector<EcoOrbit> one = ecos_in_window(e.theta_bar_plus - w, e.theta_bar_plus + w, 16, 1e-3, 0.0, cfg);
  REQUIRE_FALSE(one.empty());
  CHECK(one.front().theta_bar_plus == doctest::Approx(e.theta_bar_plus).epsilon(1e-9));
  const EcoReturn r = eco_return(e.theta_bar_plus, 1e-3, 0.0, cfg);
  CHECK(r.status == HybridStatus::SectionReached);
  CHECK(std::abs(r.G) < 1e-8);
}

TEST_CASE("triple intersection energy") {
  const TripleIntersectionResult a = find_triple_energy(1e-4, 0.1);
  REQUIRE(a.ok);
  CHECK(std::abs(a.h_star_over_mu - a.M_plus_0) < 0.5);
  CHECK(a.angles_ok);
  CHECK(-pi / 2 < a.A);
  CHECK(a.A < a.B);
  CHECK(a.B < 0.0);
  CHECK(a.slopes_ok);
  CHECK(std::abs(a.residual) <= 1e-6);
  // the energy is a property of the manifolds, not of the section used to find it
  const TripleIntersectionResult b = find_triple_energy(1e-4, 0.05);
  REQUIRE(b.ok);
  CHECK(b.h_star_over_mu == doctest::Approx(a.h_star_over_mu).epsilon(1e-3));
  const auto j = nlohmann::json::parse(triple_json(a));
  CHECK(j["ok"] == true);
  CHECK(j["h_star_over_mu"] == a.h_star_over_mu);
}
