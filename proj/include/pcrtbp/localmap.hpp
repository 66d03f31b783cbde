#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "pcrtbp/charts.hpp"
#include "pcrtbp/constants.hpp"
#include "pcrtbp/flow.hpp"
#include "pcrtbp/manifolds.hpp"

namespace pcrtbp {

// Minus: (s, beta~, z) around S-; Plus: (s, iota~, w) around S+.
enum class Side { Minus, Plus };

struct StraightenedPoint {
  Side side = Side::Minus;
  double s = 0.0;
  double b = 0.0;  // beta~ or iota~
  double c = 0.0;  // z or w
};

// chi_-(s, z) = z + a1 s^3, chi_+(s, w) = w - a1 s^3.
inline double chi_a1(double mu) { return 8.0 / (3.0 * m0_of(mu)); }

// Leading-order coordinates: psi truncated to 0 and chi to its cubic term.
StraightenedPoint straighten_leading(const ReducedState& p, Side side, double mu);
ReducedState unstraighten_leading(const StraightenedPoint& p, double mu, double h);

// Exact straightening restricted to the section s = delta, built from traced fibers:
// on the minus side W^s(S-) is {beta~ = 0} and z is the base angle of the stable fiber with the
// same y; on the plus side W^u(S+) is {iota~ = 0} and w is the base angle of the unstable fiber.
class SectionStraightener {
 public:
  SectionStraightener(Side side, double mu, double h, double delta, const ManifoldConfig& cfg);

  // Fiber over base angle c on s = delta: (beta or iota, y or x).
  std::array<double, 2> fiber(double c) const;
  // Base angle of the fiber whose y (or x) equals `y`; lifted near y.
  double base_of(double y) const;

  StraightenedPoint to_straightened(const ReducedState& p) const;
  ReducedState from_straightened(double b, double c) const;

  Side side() const { return side_; }
  double delta() const { return delta_; }
  double mu() const { return mu_; }
  double h() const { return h_; }

 private:
  Side side_;
  double mu_, h_, delta_;
  ManifoldConfig cfg_;
};

struct TransitResult {
  bool ok = false;
  bool extended = false;  // nu = 0: continuous extension, no integration
  std::string diagnostic;
  double nu = 0.0, z_in = 0.0;
  StraightenedPoint in, out;
  ReducedState red_in{}, red_out{};
  double s_min = 0.0;
  double s1 = -1.0, s2 = -1.0;     // s on the intermediate sections beta = +-delta and beta = +-(pi - delta)
  double tau1 = 0.0, tau2 = 0.0;
  bool ordered = false;            // first intermediate section hit before the second
  double tau = 0.0, t = 0.0;       // transit duration
  double energy_residual = 0.0;    // |H - h| at the output point
  Trajectory traj;
};

// Transition map from Sigma~^< (beta~ = nu, z = z_in) to Sigma~^>. nu > 0 gives the
// (<,+) -> (>,-) map, nu < 0 the mirrored one.
TransitResult transit(double nu, double z_in, double mu, double h, double delta, const ManifoldConfig& cfg = {});
TransitResult transit(double nu, double z_in, const SectionStraightener& minus, const SectionStraightener& plus,
                      const ManifoldConfig& cfg = {});

struct TransitReport {
  double delta = 0.0, mu = 0.0, h = 0.0;
  double z0 = 0.0, z1 = 0.0;  // input curve z_in(nu) = z0 + z1 nu
  std::vector<TransitResult> rows;
  double C1 = 0.0;            // max |iota~ + nu| / (delta nu)
  double C2 = 0.0;            // max |w - z_in| / (delta^2 nu + nu^2)
  double iota_slope = 0.0;    // least-squares slope of iota~ against nu through the origin
  double w_loglog_slope = 0.0;  // log-log slope of |w - z_in| over the upper half of the grid
  std::array<double, 3> tangent{};  // finite-difference (ds, d iota~, dw) / d nu at the smallest nu
  double limit_error = 0.0;   // distance of the image at nu = 1e-6 delta from (delta, 0, z0)
  bool monotone = false;
  bool fit_ok = false;
  std::string diagnostic;
};

std::vector<double> default_nu_grid(double delta, int n = 13);

TransitReport verify_transition_estimates(double delta, const std::vector<double>& nu_grid, double mu, double h,
                                          double z0 = 0.0, double z1 = 0.0, const ManifoldConfig& cfg = {});

std::string transit_report_json(const TransitReport& r);
// nu, iota_out, w_out, s_min
void write_transit_csv(std::ostream& os, const TransitReport& r);

}  // namespace pcrtbp
