#pragma once

#include <array>
#include <string>
#include <vector>

namespace pcrtbp {

enum class TailModel {
  Majorant,  // absolute-value majorants on [0, c] and [C, inf)
  Sharp,  // leading 1/s^{4/3} oscillatory term by the Dirichlet bound, remainder by majorant
};

struct QuadratureBudget {
  double c = 1e-3;         // inner cutoff
  double C = 100.0;        // outer cutoff
  double tol = 1e-10;      // quadrature target on [c, C]
  double exclusion = 0.45; // half-width D' of the excluded window around sqrt(2)/3
  TailModel derivative_tail = TailModel::Majorant;
};

// 0 < c < kappa^{-3/2} < C, tol > 0, 0 <= exclusion < pi.
void validate(const QuadratureBudget& b);

struct MelnikovEval {
  double theta = 0.0;
  double value = 0.0;
  double err = 0.0;  // quad_err + inner_tail + outer_tail (all scaled by kappa)
  double quad_err = 0.0;
  double inner_tail = 0.0;
  double outer_tail = 0.0;
  double lo() const { return value - err; }
  double hi() const { return value + err; }
};

// theta outside (sqrt2/3 - D', sqrt2/3 + D') mod 2 pi.
bool admissible(double theta, double exclusion);

// Throws DomainError for inadmissible theta.
MelnikovEval melnikov_plus(double theta, const QuadratureBudget& b = {});
MelnikovEval melnikov_minus(double theta, const QuadratureBudget& b = {});
MelnikovEval melnikov_plus_derivative(double theta, const QuadratureBudget& b = {});

// sqrt(2/kappa) * int_0^inf sin(theta - s) s^{-1/3} ds in closed form.
double i2_closed(double theta);

// Tail bounds before the kappa factor.
double derivative_inner_tail(double c);
double derivative_outer_tail(double C, TailModel m);
double value_inner_tail(double c);
double value_outer_tail(double C);

// The two pieces of M_+ cut at w_Sigma = (sqrt2/3) delta^3, evaluated at the section
// angle theta (argument theta + w_Sigma). M_+(theta + w_Sigma) = -(I_Splus_u + I_inf_s).
struct HalfIntegrals {
  double I_Splus_u = 0.0, I_inf_s = 0.0;
  double err_Splus_u = 0.0, err_inf_s = 0.0;
};
HalfIntegrals half_integrals(double theta, double delta, const QuadratureBudget& b = {});

enum class ScanKind { Value, Derivative };
// Parallel evaluation over a theta grid; inadmissible angles are skipped. Output order follows input.
std::vector<MelnikovEval> melnikov_scan(ScanKind kind, const std::vector<double>& thetas, const QuadratureBudget& b);

// Interval set on which the derivative of M_+ is certified nonzero.
inline const std::vector<std::array<double, 2>>& b_plus() {
  static const std::vector<std::array<double, 2>> v{
      {-1.72851, -0.583065}, {-0.407155, 0.0578054}, {0.921743, 4.15633}};
  return v;
}

enum class CertifyMode {
  Lipschitz,  // midpoint enclosure plus half-width times a bound on |M_+''| over the subinterval
  Overlap,    // enclosures at both ends of subintervals widened by eps must share a sign
};

struct CertifiedInterval {
  double a = 0.0, b = 0.0;
  double value = 0.0;   // derivative at the midpoint (Lipschitz) or at the left end (Overlap)
  double err = 0.0;
  double slack = 0.0;   // Lipschitz slack (0 in overlap mode)
  int sign = 0;         // certified sign, 0 if uncertified
  double margin = 0.0;  // |value| - err - slack (min over both ends in overlap mode)
};

struct CertifyReport {
  CertifyMode mode = CertifyMode::Lipschitz;
  int grid_n = 0;
  double exclusion = 0.3;
  QuadratureBudget budget;
  std::vector<std::array<double, 2>> set;
  std::vector<CertifiedInterval> intervals;
  std::vector<std::size_t> uncertified;
  double worst_margin = 0.0;
  bool all_certified = false;
  MelnikovEval at_zero;
  bool zero_negative = false;
  double seconds = 0.0;  // wall time, kept out of the JSON so reruns hash identically
};

// Subintervals of width 2 pi / grid_n cover each piece of `set`.
CertifyReport certify_sign(const std::vector<std::array<double, 2>>& set, int grid_n, const QuadratureBudget& b,
                           CertifyMode mode = CertifyMode::Lipschitz, double exclusion = 0.3, double eps = 1e-5);
inline CertifyReport certify_sign_on_B_plus(int grid_n, const QuadratureBudget& b,
                                            CertifyMode mode = CertifyMode::Lipschitz) {
  return certify_sign(b_plus(), grid_n, b, mode);
}

// Upper bound of |d/dtheta M_+'| over [ta, tb].
double derivative_lipschitz_bound(double ta, double tb, const QuadratureBudget& b);

std::string certify_report_json(const CertifyReport& r);

}  // namespace pcrtbp
