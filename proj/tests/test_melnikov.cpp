#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"
#include "pcrtbp/melnikov.hpp"
#include "pcrtbp/quadrature.hpp"

using namespace pcrtbp;

namespace {

// M_+ and M_+' from mpmath (30 digits, oscillatory quadrature to infinity), frozen.
struct Ref {
  double theta, value, derivative;
};
constexpr Ref oracle[] = {
    {-2.0, -1.45140328760022, -0.087234777451927},
    {-1.0, -1.01160404285332, 0.720917671085025},
    {0.0, -1.55015978745285, -4.85798006841129},
    {1.5, 2.19759107109153, -1.56009602479597},
    {2.5, 0.56462233891854, -1.73751772705198},
};

// sqrt(2/kappa) int_0^inf sin(theta - s) s^{-1/3} ds by quadrature: s = t^3 on [0, 1],
// panels on [1, L], and two integrations by parts beyond L.
double i2_quadrature(double theta) {
  const double L = 400.0;
  const QuadResult a = integrate_adaptive([&](double t) { return 3.0 * t * std::sin(theta - t * t * t); }, 0.0, 1.0, 1e-14);
  const QuadResult b = integrate_panels([&](double s) { return std::sin(theta - s) / std::cbrt(s); }, 1.0, L, 1.0, 1e-13);
  const double tail = -std::cos(theta - L) / std::cbrt(L) + std::sin(theta - L) * std::pow(L, -4.0 / 3.0) / 3.0;
  return std::sqrt(2.0 / kappa) * (a.value + b.value + tail);
}

}  // namespace

TEST_CASE("Gauss-Kronrod panel integrates degree 31 exactly") {
  const QuadResult r = gauss_kronrod21([](double x) { return std::pow(x, 31); }, 0.0, 1.0);
  CHECK(r.value == doctest::Approx(1.0 / 32.0).epsilon(1e-14));
  const QuadResult s = integrate_adaptive([](double x) { return 1.0 / std::sqrt(x); }, 1e-12, 1.0, 1e-10);
  CHECK(s.value == doctest::Approx(2.0 - 2e-6).epsilon(1e-9));
  CHECK(s.converged);
}

TEST_CASE("Melnikov values agree with the mpmath oracle within their budgets") {
  const QuadratureBudget b;
  for (const Ref& r : oracle) {
    const MelnikovEval v = melnikov_plus(r.theta, b);
    CHECK(std::abs(v.value - r.value) <= v.err);
    CHECK(std::abs(v.value - r.value) < 2e-3);
    const MelnikovEval d = melnikov_plus_derivative(r.theta, b);
    CHECK(std::abs(d.value - r.derivative) <= d.err);
    CHECK(d.err == doctest::Approx(d.quad_err + d.inner_tail + d.outer_tail));
  }
}

TEST_CASE("derivative enclosure at zero") {
  QuadratureBudget b;
  const MelnikovEval p = melnikov_plus_derivative(0.0, b);
  CHECK(p.value > -5.15341);
  CHECK(p.value < -4.56572);
  CHECK(2 * p.err <= 0.6);
  CHECK(p.hi() < 0.0);
  b.derivative_tail = TailModel::Sharp;
  const MelnikovEval s = melnikov_plus_derivative(0.0, b);
  CHECK(s.value == p.value);
  CHECK(s.err < p.err);
  CHECK(std::abs(s.value - oracle[2].derivative) <= s.err);
}

TEST_CASE("closed-form I2 matches quadrature at 20 admissible angles") {
  int n = 0;
  for (int i = 0; n < 20; ++i) {
    const double th = -pi + 0.1 + i * 0.3;
    if (!admissible(th, 0.45)) continue;
    ++n;
    CHECK(std::abs(i2_closed(th) - i2_quadrature(th)) < 1e-4);
  }
}

TEST_CASE("refining the cutoffs stays inside the old budget") {
  const QuadratureBudget coarse;
  QuadratureBudget fine = coarse;
  fine.c /= 10;
  fine.C *= 10;
  for (double th : {-2.5, -1.0, 0.0, 1.2, 2.0, 3.0}) {
    const MelnikovEval a = melnikov_plus(th, coarse), b = melnikov_plus(th, fine);
    CHECK(std::abs(a.value - b.value) <= a.err);
    CHECK(b.err < a.err);
    const MelnikovEval da = melnikov_plus_derivative(th, coarse), db = melnikov_plus_derivative(th, fine);
    CHECK(std::abs(da.value - db.value) <= da.err);
    CHECK(db.err < da.err);
  }
}

TEST_CASE("derivative is the derivative of the value") {
  QuadratureBudget b;
  b.C = 1e4;
  const double eps = 1e-4;
  for (double th : {-2.0, -0.5, 1.5, 2.8}) {
    const double fd = (melnikov_plus(th + eps, b).value - melnikov_plus(th - eps, b).value) / (2 * eps);
    const MelnikovEval d = melnikov_plus_derivative(th, b);
    CHECK(std::abs(fd - d.value) <= d.err);
    CHECK(std::abs(fd - d.value) < 5e-3);
  }
}

TEST_CASE("Lipschitz bound dominates the second derivative") {
  const QuadratureBudget b;
  const double eps = 1e-3;
  for (double th : {-1.5, -0.2, 1.0, 3.0}) {
    const double m2 =
        (melnikov_plus_derivative(th + eps, b).value - melnikov_plus_derivative(th - eps, b).value) / (2 * eps);
    CHECK(derivative_lipschitz_bound(th - 0.01, th + 0.01, b) >= std::abs(m2));
  }
}

TEST_CASE("M_- is M_+ reflected") {
  for (double th : {-2.0, 1.5})
    CHECK(melnikov_minus(th).value == doctest::Approx(-melnikov_plus(-th).value).epsilon(1e-14));
}

TEST_CASE("half integrals recombine into M_+") {
  const double delta = 0.2, w = w_sigma(delta);
  QuadratureBudget b;
  b.C = 1e4;
  for (double th : {-2.0, 1.5, 2.5}) {
    const HalfIntegrals hi = half_integrals(th, delta, b);
    const MelnikovEval m = melnikov_plus(th + w, b);
    CHECK(std::abs(-(hi.I_Splus_u + hi.I_inf_s) - m.value) <= m.err + hi.err_Splus_u + hi.err_inf_s);
  }
}

TEST_CASE("excluded window and budget validation") {
  const double pole = std::sqrt(2.0) / 3.0;
  CHECK_FALSE(admissible(pole, 0.45));
  CHECK_FALSE(admissible(pole + two_pi, 0.45));
  CHECK(admissible(pole + 0.46, 0.45));
  CHECK_THROWS_AS(melnikov_plus(pole), DomainError);
  CHECK_THROWS_AS(melnikov_plus_derivative(pole + 0.1), DomainError);
  QuadratureBudget bad;
  bad.C = 0.1;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = {};
  bad.c = 1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("scan preserves order and skips the window") {
  const std::vector<double> grid{-1.0, 0.47, 2.0, 0.0};
  const std::vector<MelnikovEval> v = melnikov_scan(ScanKind::Value, grid, QuadratureBudget{});
  REQUIRE(v.size() == 3);
  CHECK(v[0].theta == -1.0);
  CHECK(v[1].theta == 2.0);
  CHECK(v[2].theta == 0.0);
  CHECK(v[0].value == melnikov_plus(-1.0).value);
}

TEST_CASE("sign certification on a piece of B+") {
  QuadratureBudget b;
  b.derivative_tail = TailModel::Sharp;
  const CertifyReport r = certify_sign({{-0.407155, 0.0578054}}, 10000, b);
  CHECK(r.all_certified);
  CHECK(r.uncertified.empty());
  CHECK(r.zero_negative);
  CHECK(r.worst_margin > 0.0);
  for (const CertifiedInterval& iv : r.intervals) CHECK(iv.sign == -1);
  // subintervals tile the piece
  CHECK(r.intervals.front().a == doctest::Approx(-0.407155));
  CHECK(r.intervals.back().b == doctest::Approx(0.0578054));
  const auto j = nlohmann::json::parse(certify_report_json(r));
  CHECK(j["all_certified"] == true);
  CHECK(j["derivative_at_zero"]["certified_negative"] == true);
  CHECK(j["subintervals"] == r.intervals.size());
  // overlap mode agrees on the same piece
  const CertifyReport o = certify_sign({{-0.407155, 0.0578054}}, 10000, b, CertifyMode::Overlap);
  CHECK(o.all_certified);
  // the zero of M_+' near -0.5 cannot be certified
  const CertifyReport z = certify_sign({{-0.58, -0.41}}, 2000, b);
  CHECK_FALSE(z.all_certified);
}
