#include "pcrtbp/melnikov.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>
#include <tbb/parallel_for.h>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"
#include "pcrtbp/quadrature.hpp"

namespace pcrtbp {

namespace {

const double pole = std::sqrt(2.0) / 3.0;  // kappa^{-3/2}
const double sqrt2k = std::sqrt(2.0 / kappa);
constexpr double panel = pi / 4.0;

inline double s23(double s) {
  const double c = std::cbrt(s);
  return c * c;
}

// s^{2/3} sin(a - s) / D^{3/2}
inline double value_integrand(double s, double a) {
  const double t = s23(s), x = kappa * t, ph = a - s;
  const double D = 1.0 + x * x - 2.0 * x * std::cos(ph);
  return t * std::sin(ph) / (D * std::sqrt(D));
}

// s^{2/3} cos(phi) / D^{3/2} - 3 kappa s^{4/3} sin^2(phi) / D^{5/2}
inline double derivative_integrand(double s, double th) {
  const double t = s23(s), x = kappa * t, ph = th - s;
  const double sp = std::sin(ph), cp = std::cos(ph);
  const double D = 1.0 + x * x - 2.0 * x * cp;
  const double D32 = D * std::sqrt(D);
  return t * cp / D32 - 3.0 * kappa * t * t * sp * sp / (D32 * D);
}

// Largest cos(phi) over phi in [lo, hi].
double max_cos(double lo, double hi) {
  if (hi - lo >= two_pi) return 1.0;
  const double k = std::ceil(lo / two_pi);
  if (k * two_pi <= hi) return 1.0;
  return std::max(std::cos(lo), std::cos(hi));
}

double dirichlet_lead(double C) { return 2.0 * std::pow(C, -4.0 / 3.0) / (kappa * kappa * kappa); }

// Pieces of the sharp outer bound: x_C, e_C = (2 x_C + 1) / x_C^2 and (1 - e_C)^{5/2}.
struct OuterGeom {
  double xC, eC, f;
  bool ok;
};
OuterGeom outer_geom(double C) {
  const double xC = kappa * s23(C);
  const double eC = (2.0 * xC + 1.0) / (xC * xC);
  return {xC, eC, eC < 1.0 ? std::pow(1.0 - eC, 2.5) : 0.0, eC < 1.0};
}

}  // namespace

void validate(const QuadratureBudget& b) {
  if (!(b.c > 0 && b.c < pole && pole < b.C))
    throw ConfigError(fmt::format("quadrature budget needs 0 < c < {:.6f} < C (got c={}, C={})", pole, b.c, b.C));
  if (!(b.tol > 0)) throw ConfigError("quadrature tol must be > 0");
  if (!(b.exclusion >= 0 && b.exclusion < pi)) throw ConfigError("exclusion half-width must lie in [0, pi)");
}

bool admissible(double theta, double exclusion) { return std::abs(wrap_pi(theta - pole)) >= exclusion; }

double derivative_inner_tail(double c) {
  const double q = 1.0 - kappa * s23(c);
  return 0.6 * std::pow(c, 5.0 / 3.0) / (q * q * q) + 9.0 * kappa / 7.0 * std::pow(c, 7.0 / 3.0) / std::pow(q, 5);
}

double derivative_outer_tail(double C, TailModel m) {
  const double q = kappa - 1.0 / s23(C);
  const double majorant = 3.0 / (std::cbrt(C) * q * q * q) + 3.0 * kappa / (C * std::pow(q, 5));
  if (m == TailModel::Majorant) return majorant;
  const OuterGeom g = outer_geom(C);
  if (!g.ok) return majorant;
  const double k4 = kappa * kappa * kappa * kappa;
  const double sharp = dirichlet_lead(C) + (1.5 * (2.0 + 1.0 / g.xC) + 3.0) / (k4 * C * g.f);
  return std::min(majorant, sharp);
}

double value_inner_tail(double c) {
  const double q = 1.0 - kappa * s23(c);
  return 0.6 * std::pow(c, 5.0 / 3.0) / (q * q * q);
}

double value_outer_tail(double C) {
  const double q = kappa - 1.0 / s23(C);
  const double crude = 3.0 / (std::cbrt(C) * q * q * q);
  const OuterGeom g = outer_geom(C);
  if (!g.ok) return crude;
  const double k4 = kappa * kappa * kappa * kappa;
  return std::min(crude, dirichlet_lead(C) + 1.5 * (2.0 + 1.0 / g.xC) / (k4 * C * g.f));
}

double i2_closed(double theta) {
  return sqrt2k * gamma_two_thirds * (0.5 * std::sin(theta) - 0.5 * std::sqrt(3.0) * std::cos(theta));
}

MelnikovEval melnikov_plus(double theta, const QuadratureBudget& b) {
  validate(b);
  if (!admissible(theta, b.exclusion))
    throw DomainError(fmt::format("melnikov_plus: theta = {} lies in the excluded window", theta));
  const QuadResult q =
      integrate_panels([theta](double s) { return value_integrand(s, theta); }, b.c, b.C, panel, b.tol);
  MelnikovEval e;
  e.theta = theta;
  // int_0^inf cos(a - s) s^{-1/3} ds = Gamma(2/3) cos(a - pi/3)
  e.value = kappa * q.value + sqrt2k * gamma_two_thirds * std::cos(theta - pi / 3.0);
  e.quad_err = kappa * q.error;
  e.inner_tail = kappa * value_inner_tail(b.c);
  e.outer_tail = kappa * value_outer_tail(b.C);
  e.err = e.quad_err + e.inner_tail + e.outer_tail;
  return e;
}

MelnikovEval melnikov_minus(double theta, const QuadratureBudget& b) {
  MelnikovEval e = melnikov_plus(-theta, b);
  e.theta = theta;
  e.value = -e.value;
  return e;
}

MelnikovEval melnikov_plus_derivative(double theta, const QuadratureBudget& b) {
  validate(b);
  if (!admissible(theta, b.exclusion))
    throw DomainError(fmt::format("melnikov_plus_derivative: theta = {} lies in the excluded window", theta));
  const QuadResult q =
      integrate_panels([theta](double s) { return derivative_integrand(s, theta); }, b.c, b.C, panel, b.tol);
  MelnikovEval e;
  e.theta = theta;
  e.value = kappa * q.value - i2_closed(theta);
  e.quad_err = kappa * q.error;
  e.inner_tail = kappa * derivative_inner_tail(b.c);
  e.outer_tail = kappa * derivative_outer_tail(b.C, b.derivative_tail);
  e.err = e.quad_err + e.inner_tail + e.outer_tail;
  return e;
}

HalfIntegrals half_integrals(double theta, double delta, const QuadratureBudget& b) {
  validate(b);
  if (!(delta > 0 && delta < 1)) throw ConfigError("half_integrals: delta must lie in (0, 1)");
  const double w = w_sigma(delta);
  const double a = theta + w;
  if (!admissible(a, b.exclusion))
    throw DomainError(fmt::format("half_integrals: theta + w_Sigma = {} lies in the excluded window", a));
  HalfIntegrals out;

  // [0, w] with s = t^3: both integrands become smooth in t.
  const double tw = std::cbrt(w);
  const QuadResult near = integrate_adaptive(
      [a](double t) {
        const double s = t * t * t;
        return 3.0 * t * t * (kappa * value_integrand(s, a) + sqrt2k * std::cos(a - s) / t);
      },
      0.0, tw, 1e-14);  // Kronrod nodes are interior, so t = 0 is never evaluated
  out.I_Splus_u = -near.value;
  out.err_Splus_u = near.error;

  // [w, inf): quadrature on [w, C], analytic handling beyond C.
  const QuadResult far1 =
      integrate_panels([a](double s) { return value_integrand(s, a); }, w, b.C, panel, b.tol);
  const QuadResult far2 =
      integrate_panels([a](double s) { return std::cos(a - s) / std::cbrt(s); }, w, b.C, panel, b.tol);
  const double C = b.C;
  // int_C^inf cos(a - s) s^{-1/3} ds by two integrations by parts, remainder below C^{-4/3}/3.
  const double tail2 = std::sin(a - C) / std::cbrt(C) + std::cos(a - C) * std::pow(C, -4.0 / 3.0) / 3.0;
  const double tail2_err = std::pow(C, -4.0 / 3.0) / 3.0;
  out.I_inf_s = -(kappa * far1.value + sqrt2k * (far2.value + tail2));
  out.err_inf_s = kappa * (far1.error + value_outer_tail(C)) + sqrt2k * (far2.error + tail2_err);
  return out;
}

std::vector<MelnikovEval> melnikov_scan(ScanKind kind, const std::vector<double>& thetas,
                                        const QuadratureBudget& b) {
  validate(b);
  std::vector<double> keep;
  for (double t : thetas)
    if (admissible(t, b.exclusion)) keep.push_back(t);
  std::vector<MelnikovEval> out(keep.size());
  tbb::parallel_for(std::size_t(0), keep.size(), [&](std::size_t i) {
    out[i] = kind == ScanKind::Value ? melnikov_plus(keep[i], b) : melnikov_plus_derivative(keep[i], b);
  });
  return out;
}

double derivative_lipschitz_bound(double ta, double tb, const QuadratureBudget& b) {
  // Majorant of |d/dtheta| of the derivative integrand with D replaced by its minimum over the interval.
  auto maj = [ta, tb](double s) {
    const double t = s23(s), x = kappa * t;
    const double D = std::max(1.0 + x * x - 2.0 * x * max_cos(ta - s, tb - s), 1e-300);
    const double rD = 1.0 / D, sD = std::sqrt(rD);
    const double D32 = rD * sD, D52 = D32 * rD, D72 = D52 * rD;
    return t * D32 + 3.0 * x * t * D52 + 3.0 * kappa * t * t * D52 + 15.0 * kappa * x * t * t * D72;
  };
  const QuadResult q = integrate_panels(maj, b.c, b.C, panel, 1e-6);
  const double c = b.c, C = b.C;
  const double qi = 1.0 - kappa * s23(c);
  const double inner = 0.6 * std::pow(c, 5.0 / 3.0) / std::pow(qi, 3) +
                       6.0 * kappa * (3.0 / 7.0) * std::pow(c, 7.0 / 3.0) / std::pow(qi, 5) +
                       15.0 * kappa * kappa / 3.0 * c * c * c / std::pow(qi, 7);
  const double qo = kappa - 1.0 / s23(C);
  const double outer = 3.0 / (std::cbrt(C) * std::pow(qo, 3)) + 6.0 * kappa / (C * std::pow(qo, 5)) +
                       9.0 * kappa * kappa * std::pow(C, -5.0 / 3.0) / std::pow(qo, 7);
  return kappa * (q.value + q.error + inner + outer) + sqrt2k * gamma_two_thirds;
}

CertifyReport certify_sign(const std::vector<std::array<double, 2>>& set, int grid_n, const QuadratureBudget& b,
                           CertifyMode mode, double exclusion, double eps) {
  validate(b);
  if (grid_n < 1) throw ConfigError("certify: grid_n must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  CertifyReport rep;
  rep.mode = mode;
  rep.grid_n = grid_n;
  rep.exclusion = exclusion;
  rep.budget = b;
  rep.set = set;
  QuadratureBudget bb = b;
  bb.exclusion = exclusion;
  const double width = two_pi / grid_n;
  for (const auto& iv : set) {
    if (!(iv[1] > iv[0])) throw ConfigError("certify: empty interval");
    const long n = std::max(1L, static_cast<long>(std::ceil((iv[1] - iv[0]) / width - 1e-9)));
    const double w = (iv[1] - iv[0]) / n;
    for (long k = 0; k < n; ++k) {
      CertifiedInterval ci;
      ci.a = iv[0] + k * w;
      ci.b = k + 1 == n ? iv[1] : iv[0] + (k + 1) * w;
      rep.intervals.push_back(ci);
    }
  }
  tbb::parallel_for(std::size_t(0), rep.intervals.size(), [&](std::size_t i) {
    CertifiedInterval& ci = rep.intervals[i];
    // Both ends must stay admissible: the window is an open interval.
    const double lo = mode == CertifyMode::Overlap ? ci.a - 0.5 * eps : ci.a;
    const double hi = mode == CertifyMode::Overlap ? ci.b + 0.5 * eps : ci.b;
    const double mid = 0.5 * (lo + hi);
    const double dist = std::abs(wrap_pi(mid - pole)) - 0.5 * (hi - lo);
    if (dist < exclusion) {
      ci.sign = 0;
      ci.margin = -std::numeric_limits<double>::infinity();
      return;
    }
    if (mode == CertifyMode::Lipschitz) {
      const MelnikovEval e = melnikov_plus_derivative(mid, bb);
      ci.value = e.value;
      ci.err = e.err;
      ci.slack = 0.5 * (hi - lo) * derivative_lipschitz_bound(lo, hi, bb);
      ci.margin = std::abs(e.value) - e.err - ci.slack;
      ci.sign = ci.margin > 0 ? (e.value > 0 ? 1 : -1) : 0;
    } else {
      const MelnikovEval ea = melnikov_plus_derivative(lo, bb), eb = melnikov_plus_derivative(hi, bb);
      ci.value = ea.value;
      ci.err = std::max(ea.err, eb.err);
      const double ma = std::abs(ea.value) - ea.err, mb = std::abs(eb.value) - eb.err;
      ci.margin = std::min(ma, mb);
      const bool same = (ea.value > 0) == (eb.value > 0);
      ci.sign = (ci.margin > 0 && same) ? (ea.value > 0 ? 1 : -1) : 0;
    }
  });
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rep.intervals.size(); ++i) {
    rep.worst_margin = std::min(rep.worst_margin, rep.intervals[i].margin);
    if (rep.intervals[i].sign == 0) rep.uncertified.push_back(i);
  }
  rep.all_certified = rep.uncertified.empty();
  rep.at_zero = melnikov_plus_derivative(0.0, bb);
  rep.zero_negative = rep.at_zero.hi() < 0.0;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::string certify_report_json(const CertifyReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = r.mode == CertifyMode::Lipschitz ? "lipschitz" : "overlap";
  j["grid_n"] = r.grid_n;
  j["exclusion_half_width"] = r.exclusion;
  j["budget"] = {{"c", r.budget.c},
                 {"C", r.budget.C},
                 {"tol", r.budget.tol},
                 {"derivative_tail", r.budget.derivative_tail == TailModel::Majorant ? "majorant" : "sharp"}};
  j["subintervals"] = r.intervals.size();
  j["all_certified"] = r.all_certified;
  j["worst_margin"] = r.worst_margin;
  nlohmann::ordered_json pieces = nlohmann::ordered_json::array();
  for (const auto& iv : r.set) pieces.push_back({iv[0], iv[1]});
  j["set"] = pieces;
  nlohmann::ordered_json unc = nlohmann::ordered_json::array();
  for (std::size_t i : r.uncertified) {
    const auto& c = r.intervals[i];
    unc.push_back({{"a", c.a}, {"b", c.b}, {"value", c.value}, {"err", c.err}, {"slack", c.slack}});
  }
  j["uncertified"] = unc;
  j["derivative_at_zero"] = {{"value", r.at_zero.value},
                             {"err", r.at_zero.err},
                             {"lo", r.at_zero.lo()},
                             {"hi", r.at_zero.hi()},
                             {"certified_negative", r.zero_negative}};
  return j.dump(2);
}

}  // namespace pcrtbp
