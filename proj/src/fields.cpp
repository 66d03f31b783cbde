#include "pcrtbp/fields.hpp"

#include <algorithm>
#include <cmath>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"

namespace pcrtbp {

const char* field_name(FieldId id) {
  switch (id) {
    case FieldId::Cartesian: return "cartesian";
    case FieldId::PolarCM: return "polar_cm";
    case FieldId::PolarP1: return "polar_p1";
    case FieldId::Infinity: return "infinity";
    case FieldId::Regularized: return "regularized";
    case FieldId::Reduced: return "reduced";
    case FieldId::CollisionTorus: return "collision_torus";
    case FieldId::StraightenedMinus: return "straightened_minus";
    case FieldId::StraightenedPlus: return "straightened_plus";
  }
  return "?";
}

int field_dim(FieldId id) {
  switch (id) {
    case FieldId::Reduced:
    case FieldId::StraightenedMinus:
    case FieldId::StraightenedPlus: return 3;
    case FieldId::CollisionTorus: return 2;
    default: return 4;
  }
}

bool field_uses_tau(FieldId id) {
  return !(id == FieldId::Cartesian || id == FieldId::PolarCM || id == FieldId::PolarP1 || id == FieldId::Infinity);
}

Chart field_chart(FieldId id) {
  switch (id) {
    case FieldId::Cartesian: return Chart::Cartesian;
    case FieldId::PolarCM: return Chart::PolarCM;
    case FieldId::PolarP1: return Chart::PolarP1;
    case FieldId::Infinity: return Chart::Infinity;
    case FieldId::Regularized: return Chart::Regularized;
    case FieldId::Reduced: return Chart::Reduced;
    default: throw DomainError("field_chart: field has no phase-space chart");
  }
}

FieldId field_for_chart(Chart c) {
  switch (c) {
    case Chart::Cartesian: return FieldId::Cartesian;
    case Chart::PolarCM: return FieldId::PolarCM;
    case Chart::PolarP1: return FieldId::PolarP1;
    case Chart::Infinity: return FieldId::Infinity;
    case Chart::Regularized: return FieldId::Regularized;
    case Chart::Reduced: return FieldId::Reduced;
  }
  return FieldId::Cartesian;
}

double time_factor(FieldId id, const Vec4& x) {
  if (id == FieldId::Regularized) return x[0] * std::sqrt(x[0]);
  if (id == FieldId::Reduced) return x[0] * x[0] * x[0];
  if (field_uses_tau(id)) return 0.0;  // on the collision set physical time is frozen
  return 1.0;
}

namespace {

Vec4 cartesian_field(const Vec4& x, double mu) {
  const double q1 = x[0], q2 = x[1], p1 = x[2], p2 = x[3];
  const double a1 = q1 + mu, a2 = q1 - 1.0 + mu;
  const double d1 = std::hypot(a1, q2), d2 = std::hypot(a2, q2);
  if (!(d1 > chart_guard && d2 > chart_guard)) throw SingularChartError("cartesian field at a primary");
  const double k1 = (1.0 - mu) / (d1 * d1 * d1), k2 = mu / (d2 * d2 * d2);
  return {p1 + q2, p2 - q1, p2 - k1 * a1 - k2 * a2, -p1 - k1 * q2 - k2 * q2};
}

Vec4 polar_cm_field(const Vec4& x, double mu) {
  const double r = x[0], th = x[1], R = x[2], Th = x[3];
  if (!(r > chart_guard)) throw SingularChartError("polar_cm field at r = 0");
  const double c = std::cos(th), s = std::sin(th), nu = 1.0 - mu;
  const double d1sq = r * r + 2.0 * r * mu * c + mu * mu;
  const double d2sq = r * r - 2.0 * r * nu * c + nu * nu;
  const double i1 = (1.0 - mu) / (d1sq * std::sqrt(d1sq)), i2 = mu / (d2sq * std::sqrt(d2sq));
  // U = (1-mu)/d1 + mu/d2
  const double Ur = -i1 * (r + mu * c) - i2 * (r - nu * c);
  const double Uth = i1 * r * mu * s - i2 * r * nu * s;
  return {R, Th / (r * r) - 1.0, Th * Th / (r * r * r) + Ur, Uth};
}

Vec4 polar_p1_field(const Vec4& x, double mu) {
  const double r = x[0], th = x[1], R = x[2], Th = x[3];
  if (!(r > chart_guard)) throw SingularChartError("polar_p1 field at r = 0");
  const double c = std::cos(th), s = std::sin(th);
  const double d2sq = 1.0 + r * r - 2.0 * r * c;
  const double i3 = 1.0 / (d2sq * std::sqrt(d2sq));
  return {R + mu * s,
          Th / (r * r) - 1.0 + mu * c / r,
          Th * Th / (r * r * r) - (1.0 - mu) / (r * r) + mu * Th * c / (r * r) - mu * (r - c) * i3,
          -mu * R * c + mu * Th * s / r - mu * r * s * i3};
}

Vec4 infinity_field(const Vec4& x, double mu) {
  const double xi = x[0], th = x[1], R = x[2], Th = x[3];
  const double c = std::cos(th), s = std::sin(th), nu = 1.0 - mu;
  const double x2 = xi * xi, x3 = x2 * xi, x4 = x2 * x2, x6 = x4 * x2;
  const double A = 1.0 + x2 * mu * c + x4 * mu * mu / 4.0;
  const double B = 1.0 - x2 * nu * c + x4 * nu * nu / 4.0;
  if (!(B > 0)) throw SingularChartError("infinity field at P2");
  const double iA = 1.0 / std::sqrt(A), iB = 1.0 / std::sqrt(B);
  const double iA3 = iA * iA * iA, iB3 = iB * iB * iB;
  // V_hat = (xi^2/2) [ nu A^{-1/2} + mu B^{-1/2} - 1 ]
  const double Axi = 2.0 * xi * mu * c + x3 * mu * mu, Bxi = -2.0 * xi * nu * c + x3 * nu * nu;
  const double Vxi = xi * (nu * iA + mu * iB - 1.0) - 0.25 * x2 * (nu * iA3 * Axi + mu * iB3 * Bxi);
  const double Ath = -x2 * mu * s, Bth = x2 * nu * s;
  const double Vth = -0.25 * x2 * (nu * iA3 * Ath + mu * iB3 * Bth);
  return {-R * x3 / 4.0, Th * x4 / 4.0 - 1.0, -x4 / 4.0 + Th * Th * x6 / 8.0 - x3 / 4.0 * Vxi, Vth};
}

Vec4 regularized_field(const Vec4& x, double mu) {
  const double r = x[0], th = x[1], v = x[2], u = x[3];
  if (r < 0) throw DomainError("regularized field: r < 0");
  const double c = std::cos(th), s = std::sin(th);
  const double r12 = std::sqrt(r), r32 = r * r12, r2 = r * r;
  const double d2sq = 1.0 + r2 - 2.0 * r * c;
  const double i3 = 1.0 / (d2sq * std::sqrt(d2sq));
  return {r * v, u,
          0.5 * v * v + u * u + 2.0 * u * r32 + r2 * r - 1.0 + mu * (1.0 - r2 * (c + (r - c) * i3)),
          -0.5 * u * v - 2.0 * v * r32 + mu * r2 * s * (1.0 - i3)};
}

Vec4 reduced_field(const Vec4& x, double mu, double h) {
  const double sv = x[0], th = x[1], al = x[2];
  if (sv < 0) throw DomainError("reduced field: s < 0");
  const double rho = rho_on_shell(sv, th, mu, h);
  const double m2 = 2.0 * (1.0 - mu) + rho;
  if (!(m2 > 0)) throw SingularChartError("reduced field: 2(1-mu)+rho <= 0");
  const double m = std::sqrt(m2);
  const double v = m * std::sin(al), u = m * std::cos(al);
  const Vec4 g = regularized_field({sv * sv, th, v, u}, mu);
  // alpha = atan2(v, u) differentiated along the regularized field; regular at sin(alpha) = 0.
  return {0.5 * sv * v, u, (u * g[2] - v * g[3]) / m2, 0.0};
}

}  // namespace

Vec4 eval_field(FieldId id, const Vec4& x, double mu, double h) {
  switch (id) {
    case FieldId::Cartesian: return cartesian_field(x, mu);
    case FieldId::PolarCM: return polar_cm_field(x, mu);
    case FieldId::PolarP1: return polar_p1_field(x, mu);
    case FieldId::Infinity: return infinity_field(x, mu);
    case FieldId::Regularized: return regularized_field(x, mu);
    case FieldId::Reduced: return reduced_field(x, mu, h);
    case FieldId::CollisionTorus: {
      const double m0 = m0_of(mu), c = std::cos(x[1]);
      return {m0 * c, 0.5 * m0 * c, 0.0, 0.0};
    }
    case FieldId::StraightenedMinus: {
      if (x[0] < 0) throw DomainError("straightened field: s < 0");
      const double m0 = m0_of(mu), lam = lambda_of(mu, h);
      return {-0.5 * m0 * x[0], 0.5 * m0 * x[1], 4.0 * lam * x[0] * x[0] * x[1], 0.0};
    }
    case FieldId::StraightenedPlus: {
      if (x[0] < 0) throw DomainError("straightened field: s < 0");
      const double m0 = m0_of(mu), lam = lambda_of(mu, h);
      return {0.5 * m0 * x[0], -0.5 * m0 * x[1], -4.0 * lam * x[0] * x[0] * x[1], 0.0};
    }
  }
  return {};
}

double eval_integral(IntegralId id, const ChartState& s, double mu, double h) {
  switch (id) {
    case IntegralId::H_hat: return hamiltonian(s, mu, h);
    case IntegralId::M_tilde: return M_tilde(as_collision(s, mu, h), mu, h);
    case IntegralId::M: {
      const CollisionState c = as_collision(s, mu, h);
      const double rho = c.v * c.v + c.u * c.u - 2.0 * (1.0 - mu);
      return energy_relation_M(std::sqrt(c.r), c.theta, rho, mu, h);
    }
  }
  return 0.0;
}

ConsistencyResult consistency_check(FieldId a, FieldId b, const ChartState& s, double mu, double h) {
  const Chart ca = field_chart(a), cb = field_chart(b);
  if (s.chart != ca) throw DomainError("consistency_check: state not in the chart of field A");
  const int na = chart_dim(ca), nb = chart_dim(cb);
  const Vec4 fa = eval_field(a, s.x, mu, h);
  const double eps = 1e-6;
  ChartState plus = s, minus = s;
  for (int i = 0; i < na; ++i) {
    plus.x[i] += eps * fa[i];
    minus.x[i] -= eps * fa[i];
  }
  ChartState yb, yp, ym;
  try {
    yb = convert(s, cb, mu, h);
    yp = convert(plus, cb, mu, h);
    ym = convert(minus, cb, mu, h);
  } catch (const SingularChartError&) {
    return {0.0, true};
  }
  // Physical time rates: push-forward is per unit of A's time; rescale to B's time.
  const double ta = time_factor(a, s.x), tb = time_factor(b, yb.x);
  if (ta == 0.0 || tb == 0.0) return {0.0, true};
  const double scale = tb / ta;
  const Vec4 fb = eval_field(b, yb.x, mu, h);
  double dev = 0.0;
  for (int i = 0; i < nb; ++i) {
    const double push = (yp.x[i] - ym.x[i]) / (2.0 * eps) * scale;
    dev = std::max(dev, std::abs(push - fb[i]));
  }
  return {dev, false};
}

}  // namespace pcrtbp
