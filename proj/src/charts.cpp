#include "pcrtbp/charts.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"

namespace pcrtbp {

namespace {

double center_x(Center c, double mu) { return c == Center::CM ? 0.0 : -mu; }

void guard_radius(double r, const char* where) {
  if (!(r >= chart_guard))
    throw SingularChartError(fmt::format("{}: radius {:.3e} below chart guard", where, r));
}

// Angle b re-lifted to the branch closest to the lift a.
double relift(double a, double b) { return a + wrap_pi(b - a); }

// 1 / |q - P2| for P1-centred polar data.
double inv_dist_p2(double r, double theta) {
  return 1.0 / std::sqrt(1.0 + r * r - 2.0 * r * std::cos(theta));
}

}  // namespace

void check_mu(double mu) {
  if (!(mu >= 0.0 && mu <= 0.5)) throw DomainError(fmt::format("mass ratio {} outside [0, 1/2]", mu));
}

Polar to_polar(const Cartesian& c, Center center, double mu) {
  const double x = c.q1 - center_x(center, mu), y = c.q2;
  const double r = std::hypot(x, y);
  guard_radius(r, "to_polar");
  return {center, r, std::atan2(y, x), (x * c.p1 + y * c.p2) / r, x * c.p2 - y * c.p1};
}

Cartesian from_polar(const Polar& p, double mu) {
  guard_radius(p.r, "from_polar");
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  const double w = p.Theta / p.r;
  return {center_x(p.center, mu) + p.r * c, p.r * s, p.R * c - w * s, p.R * s + w * c};
}

Polar cm_polar_to_p1_polar(const Polar& p, double mu) {
  if (p.center != Center::CM) throw DomainError("cm_polar_to_p1_polar: input not CM-centred");
  guard_radius(p.r, "cm_polar_to_p1_polar");
  const double rh = p.r, ch = std::cos(p.theta), sh = std::sin(p.theta);
  const double r = std::sqrt(rh * rh + 2.0 * rh * mu * ch + mu * mu);
  guard_radius(r, "cm_polar_to_p1_polar");
  const double th = relift(p.theta, std::atan2(rh * sh, rh * ch + mu));
  const double c = std::cos(th), s = std::sin(th);
  const double D = r * r - 2.0 * mu * r * c + mu * mu;  // = rh^2
  if (!(D > chart_guard * chart_guard)) throw SingularChartError("cm_polar_to_p1_polar: degenerate denominator");
  const double sD = std::sqrt(D);
  const double R = p.R * (r - mu * c) / sD - mu * p.Theta * s / D;
  const double Th = mu * p.R * r * s / sD + p.Theta * r * (r - mu * c) / D;
  return {Center::P1, r, th, R, Th};
}

Polar p1_polar_to_cm_polar(const Polar& p, double mu) {
  if (p.center != Center::P1) throw DomainError("p1_polar_to_cm_polar: input not P1-centred");
  Polar out = to_polar(from_polar(p, mu), Center::CM, mu);
  out.theta = relift(p.theta, out.theta);
  return out;
}

InfinityState to_infinity_chart(const Polar& cm) {
  if (cm.center != Center::CM) throw DomainError("to_infinity_chart: input not CM-centred");
  guard_radius(cm.r, "to_infinity_chart");
  return {std::sqrt(2.0 / cm.r), cm.theta, cm.R, cm.Theta};
}

Polar from_infinity_chart(const InfinityState& s) {
  if (!(s.xi >= chart_guard)) throw SingularChartError("from_infinity_chart: xi = 0 is the point at infinity");
  return {Center::CM, 2.0 / (s.xi * s.xi), s.theta_hat, s.R_hat, s.Theta_hat};
}

CollisionState to_collision(const Polar& p, double mu) {
  if (p.center != Center::P1) throw DomainError("to_collision: input not P1-centred");
  guard_radius(p.r, "to_collision");
  const double sr = std::sqrt(p.r);
  return {p.r, p.theta, (p.R + mu * std::sin(p.theta)) * sr,
          (p.Theta - p.r * p.r + mu * p.r * std::cos(p.theta)) / sr};
}

Polar from_collision(const CollisionState& c, double mu) {
  guard_radius(c.r, "from_collision");
  const double sr = std::sqrt(c.r);
  return {Center::P1, c.r, c.theta, c.v / sr - mu * std::sin(c.theta),
          c.u * sr + c.r * c.r - mu * c.r * std::cos(c.theta)};
}

double rho_on_shell(double s, double theta, double mu, double h) {
  if (s < 0) throw DomainError("rho_on_shell: s < 0");
  const double r = s * s;
  return 2.0 * r * h + r * r * r - 2.0 * mu * r * (-0.5 * mu + r * std::cos(theta) - inv_dist_p2(r, theta));
}

double energy_relation_M(double s, double theta, double rho, double mu, double h) {
  return -rho + rho_on_shell(s, theta, mu, h);
}

ReducedConversion to_reduced(const CollisionState& c, double mu, double h, double tol) {
  if (c.r < 0) throw DomainError("to_reduced: r < 0");
  const double vv = c.v * c.v + c.u * c.u;
  if (!(vv > 0)) throw SingularChartError("to_reduced: v = u = 0");
  const double s = std::sqrt(c.r);
  const double rho = vv - 2.0 * (1.0 - mu);
  const double res = std::abs(rho - rho_on_shell(s, c.theta, mu, h));
  if (res > tol) throw EnergyMismatchError(fmt::format("to_reduced: energy residual {:.3e}", res));
  return {{s, c.theta, std::atan2(c.v, c.u), rho}, res};
}

CollisionState from_reduced(const ReducedState& s, double mu) {
  const double m2 = 2.0 * (1.0 - mu) + s.rho;
  if (!(m2 > 0)) throw SingularChartError("from_reduced: 2(1-mu)+rho <= 0");
  const double m = std::sqrt(m2);
  return {s.s * s.s, s.theta, m * std::sin(s.alpha), m * std::cos(s.alpha)};
}

ReducedState make_reduced(double s, double theta, double alpha, double mu, double h) {
  return {s, theta, alpha, rho_on_shell(s, theta, mu, h)};
}

double hamiltonian(const Cartesian& c, double mu) {
  const double d1 = std::hypot(c.q1 + mu, c.q2), d2 = std::hypot(c.q1 - 1.0 + mu, c.q2);
  guard_radius(d1, "hamiltonian");
  guard_radius(d2, "hamiltonian");
  return 0.5 * (c.p1 * c.p1 + c.p2 * c.p2) - c.q1 * c.p2 + c.q2 * c.p1 - (1.0 - mu) / d1 - mu / d2;
}

double hamiltonian(const Polar& p, double mu) {
  guard_radius(p.r, "hamiltonian");
  const double r = p.r, c = std::cos(p.theta);
  const double kin = 0.5 * (p.R * p.R + p.Theta * p.Theta / (r * r));
  if (p.center == Center::CM) {
    const double d1 = std::sqrt(r * r + 2.0 * r * mu * c + mu * mu);
    const double d2 = std::sqrt(r * r - 2.0 * r * (1.0 - mu) * c + (1.0 - mu) * (1.0 - mu));
    guard_radius(d1, "hamiltonian");
    guard_radius(d2, "hamiltonian");
    return kin - p.Theta - (1.0 - mu) / d1 - mu / d2;
  }
  const double s = std::sin(p.theta);
  return kin - (1.0 - mu) / r - p.Theta + mu * p.R * s + mu * p.Theta * c / r - mu * inv_dist_p2(r, p.theta);
}

double hamiltonian(const InfinityState& s, double mu) {
  const double x2 = s.xi * s.xi, x4 = x2 * x2;
  const double c = std::cos(s.theta_hat);
  const double A = 1.0 + x2 * mu * c + x4 * mu * mu / 4.0;
  const double B = 1.0 - x2 * (1.0 - mu) * c + x4 * (1.0 - mu) * (1.0 - mu) / 4.0;
  if (!(B > 0)) throw SingularChartError("hamiltonian: at P2");
  const double V = 0.5 * x2 * ((1.0 - mu) / std::sqrt(A) + mu / std::sqrt(B) - 1.0);
  return 0.5 * (s.R_hat * s.R_hat + s.Theta_hat * s.Theta_hat * x4 / 4.0) - 0.5 * x2 - s.Theta_hat - V;
}

double hamiltonian(const CollisionState& c, double mu) {
  guard_radius(c.r, "hamiltonian");
  const double r = c.r;
  return 0.5 * (c.v * c.v + c.u * c.u) / r - 0.5 * r * r + mu * r * std::cos(c.theta) - 0.5 * mu * mu -
         (1.0 - mu) / r - mu * inv_dist_p2(r, c.theta);
}

double M_tilde(const CollisionState& c, double mu, double h) {
  const double r = c.r;
  return -r * h + 0.5 * (c.v * c.v + c.u * c.u) - 0.5 * r * r * r - 1.0 + mu +
         mu * r * (-0.5 * mu + r * std::cos(c.theta) - inv_dist_p2(r, c.theta));
}

Cartesian reflect(const Cartesian& c) { return {c.q1, -c.q2, -c.p1, c.p2}; }
Polar reflect(const Polar& p) { return {p.center, p.r, -p.theta, -p.R, p.Theta}; }
InfinityState reflect(const InfinityState& s) { return {s.xi, -s.theta_hat, -s.R_hat, s.Theta_hat}; }
CollisionState reflect(const CollisionState& c) { return {c.r, -c.theta, -c.v, c.u}; }
ReducedState reflect(const ReducedState& s) { return {s.s, -s.theta, -s.alpha, s.rho}; }

const char* chart_name(Chart c) {
  switch (c) {
    case Chart::Cartesian: return "cartesian";
    case Chart::PolarCM: return "polar_cm";
    case Chart::PolarP1: return "polar_p1";
    case Chart::Infinity: return "infinity";
    case Chart::Regularized: return "regularized";
    case Chart::Reduced: return "reduced";
  }
  return "?";
}

int chart_dim(Chart c) { return c == Chart::Reduced ? 3 : 4; }

ChartState tag(const Cartesian& c) { return {Chart::Cartesian, {c.q1, c.q2, c.p1, c.p2}}; }
ChartState tag(const Polar& p) {
  return {p.center == Center::CM ? Chart::PolarCM : Chart::PolarP1, {p.r, p.theta, p.R, p.Theta}};
}
ChartState tag(const InfinityState& s) { return {Chart::Infinity, {s.xi, s.theta_hat, s.R_hat, s.Theta_hat}}; }
ChartState tag(const CollisionState& c) { return {Chart::Regularized, {c.r, c.theta, c.v, c.u}}; }
ChartState tag(const ReducedState& s) { return {Chart::Reduced, {s.s, s.theta, s.alpha, 0.0}}; }

namespace {

Polar untag_polar(const ChartState& s) {
  return {s.chart == Chart::PolarCM ? Center::CM : Center::P1, s.x[0], s.x[1], s.x[2], s.x[3]};
}

}  // namespace

Polar as_polar(const ChartState& s, Center center, double mu, double h) {
  switch (s.chart) {
    case Chart::Cartesian: return to_polar({s.x[0], s.x[1], s.x[2], s.x[3]}, center, mu);
    case Chart::PolarCM:
    case Chart::PolarP1: {
      Polar p = untag_polar(s);
      if (p.center == center) return p;
      return center == Center::P1 ? cm_polar_to_p1_polar(p, mu) : p1_polar_to_cm_polar(p, mu);
    }
    case Chart::Infinity: {
      Polar p = from_infinity_chart({s.x[0], s.x[1], s.x[2], s.x[3]});
      return center == Center::CM ? p : cm_polar_to_p1_polar(p, mu);
    }
    case Chart::Regularized: {
      Polar p = from_collision({s.x[0], s.x[1], s.x[2], s.x[3]}, mu);
      return center == Center::P1 ? p : p1_polar_to_cm_polar(p, mu);
    }
    case Chart::Reduced: {
      Polar p = from_collision(from_reduced(make_reduced(s.x[0], s.x[1], s.x[2], mu, h), mu), mu);
      return center == Center::P1 ? p : p1_polar_to_cm_polar(p, mu);
    }
  }
  throw DomainError("as_polar: unknown chart");
}

Cartesian as_cartesian(const ChartState& s, double mu, double h) {
  if (s.chart == Chart::Cartesian) return {s.x[0], s.x[1], s.x[2], s.x[3]};
  const Center c = s.chart == Chart::PolarCM || s.chart == Chart::Infinity ? Center::CM : Center::P1;
  return from_polar(as_polar(s, c, mu, h), mu);
}

CollisionState as_collision(const ChartState& s, double mu, double h) {
  if (s.chart == Chart::Regularized) return {s.x[0], s.x[1], s.x[2], s.x[3]};
  if (s.chart == Chart::Reduced) return from_reduced(make_reduced(s.x[0], s.x[1], s.x[2], mu, h), mu);
  return to_collision(as_polar(s, Center::P1, mu, h), mu);
}

ReducedState as_reduced(const ChartState& s, double mu, double h) {
  if (s.chart == Chart::Reduced) return make_reduced(s.x[0], s.x[1], s.x[2], mu, h);
  // Off-shell input is tolerated here; the energy is h by construction in the reduced chart.
  return to_reduced(as_collision(s, mu, h), mu, h, 1e300).state;
}

InfinityState as_infinity(const ChartState& s, double mu, double h) {
  if (s.chart == Chart::Infinity) return {s.x[0], s.x[1], s.x[2], s.x[3]};
  return to_infinity_chart(as_polar(s, Center::CM, mu, h));
}

ChartState convert(const ChartState& s, Chart target, double mu, double h) {
  if (s.chart == target) return s;
  ChartState out;
  switch (target) {
    case Chart::Cartesian: out = tag(as_cartesian(s, mu, h)); break;
    case Chart::PolarCM: out = tag(as_polar(s, Center::CM, mu, h)); break;
    case Chart::PolarP1: out = tag(as_polar(s, Center::P1, mu, h)); break;
    case Chart::Infinity: out = tag(as_infinity(s, mu, h)); break;
    case Chart::Regularized: out = tag(as_collision(s, mu, h)); break;
    case Chart::Reduced: out = tag(as_reduced(s, mu, h)); break;
  }
  if (s.chart != Chart::Cartesian && target != Chart::Cartesian) out.x[1] = relift(s.x[1], out.x[1]);
  return out;
}

double radius_p1(const ChartState& s, double mu) {
  switch (s.chart) {
    case Chart::PolarP1:
    case Chart::Regularized: return s.x[0];
    case Chart::Reduced: return s.x[0] * s.x[0];
    default: {
      const Cartesian c = as_cartesian(s, mu, 0.0);
      return std::hypot(c.q1 + mu, c.q2);
    }
  }
}

double radius_cm(const ChartState& s, double mu) {
  switch (s.chart) {
    case Chart::PolarCM: return s.x[0];
    case Chart::Infinity: return 2.0 / (s.x[0] * s.x[0]);
    case Chart::Cartesian: return std::hypot(s.x[0], s.x[1]);
    case Chart::PolarP1:
    case Chart::Regularized: {
      const double r = s.x[0];
      return std::sqrt(r * r - 2.0 * mu * r * std::cos(s.x[1]) + mu * mu);
    }
    case Chart::Reduced: {
      const double r = s.x[0] * s.x[0];
      return std::sqrt(r * r - 2.0 * mu * r * std::cos(s.x[1]) + mu * mu);
    }
  }
  return 0.0;
}

double hamiltonian(const ChartState& s, double mu, double h) {
  switch (s.chart) {
    case Chart::Cartesian: return hamiltonian(Cartesian{s.x[0], s.x[1], s.x[2], s.x[3]}, mu);
    case Chart::PolarCM:
    case Chart::PolarP1: return hamiltonian(untag_polar(s), mu);
    case Chart::Infinity: return hamiltonian(InfinityState{s.x[0], s.x[1], s.x[2], s.x[3]}, mu);
    case Chart::Regularized: return hamiltonian(CollisionState{s.x[0], s.x[1], s.x[2], s.x[3]}, mu);
    case Chart::Reduced: return h;  // on shell by construction
  }
  return 0.0;
}

}  // namespace pcrtbp
