#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "pcrtbp/flow.hpp"
#include "pcrtbp/propagate.hpp"

namespace pcrtbp {

// Sigma_h = {r_p1 = delta^2, H = h}; branch +1 for R > 0, -1 for R < 0.
struct SectionSpec {
  double delta = 0.2;
  double h = 0.0;
  int branch = +1;
};
void validate(const SectionSpec& s, double mu);

// circle = +1 seeds the unstable fiber of S+, -1 the stable fiber of S-.
struct FiberSeed {
  int circle = +1;
  double theta_bar = 0.0;
  double s0 = 1e-4;
};

struct ManifoldConfig {
  IntegratorConfig integ;
  double s0 = 1e-4;         // collision fiber seed offset
  double r_hat0 = 50.0;     // infinity manifolds start at this distance from the centre of mass
  double quad_span = 2000.0;  // length of the quadrature window for the initial angular momentum
  double p2_guard = 0.05;   // samples passing closer to P2 are dropped
  double exclusion = 0.45;  // half-width of the excluded window for distance()
  int max_iter = 40;
  double angle_tol = 1e-10;  // section angle residual; long flights carry ~1e-10 noise
};

struct CollisionTrace {
  bool ok = false;
  std::string diagnostic;
  double theta_bar = 0.0, s0 = 0.0;
  double theta = 0.0, Theta = 0.0, R = 0.0;  // section point, theta lifted near theta_bar
  ReducedState red{};
  double tau_section = 0.0, t_section = 0.0;
  double richardson_shift = -1.0;  // section displacement when s0 is halved (-1 if not requested)
  double energy_residual = 0.0;
  Trajectory traj;
};

// S+: forward in tau from (s0, theta_bar, pi/2); S-: backward in tau from (s0, theta_bar, -pi/2).
// Stops at s = delta.
CollisionTrace trace_collision_manifold(const FiberSeed& seed, double mu, const SectionSpec& sec,
                                        const ManifoldConfig& cfg, bool richardson = false);

// Section point of the collision manifold at a prescribed section angle (secant on theta_bar).
CollisionTrace collision_point_at(double theta, int circle, double mu, const SectionSpec& sec,
                                  const ManifoldConfig& cfg);

// Initial angular momentum of W^s(infinity) at w0 = (r_hat0/kappa)^{3/2} and centre-of-mass angle theta_hat.
double infinity_initial_Theta(double theta_hat, double w0, double Theta_hat_0, double mu, double quad_span);

enum class PointFlag { Ok = 0, NearP2 = 1, Failed = 2 };

struct InfinityPoint {
  PointFlag flag = PointFlag::Failed;
  std::string diagnostic;
  double theta = 0.0, Theta = 0.0, R = 0.0;
  double theta_hat_init = 0.0;
  double energy_residual = 0.0;
};

// branch +1: W^s(infinity) traced backwards to Sigma^>; -1: W^u(infinity), initial data by
// reflection, traced forwards to Sigma^<. The energy is h = -Theta_hat_0.
InfinityPoint infinity_point_at(double theta, int branch, double Theta_hat_0, double mu, double delta,
                                const ManifoldConfig& cfg);
// Same, from a prescribed initial angle (no secant); used by the convergence check.
InfinityPoint infinity_point_from(double theta_hat, int branch, double Theta_hat_0, double mu, double delta,
                                  const ManifoldConfig& cfg);

// Doubling w0 should move the section Theta by less than 10 mu w0^{-1/3}.
struct InfinityConvergence {
  double shift = 0.0, bound = 0.0;
  bool ok = false;
};
InfinityConvergence infinity_convergence(double theta, int branch, double Theta_hat_0, double mu, double delta,
                                         const ManifoldConfig& cfg);

enum class CurveSource { UnstableSplus, StableSminus, StableInfinity, UnstableInfinity };
const char* curve_source_name(CurveSource s);

struct CurveSample {
  double theta, Theta, R;
  PointFlag flag;
};

struct SectionCurve {
  CurveSource source = CurveSource::UnstableSplus;
  double mu = 0.0, h = 0.0, delta = 0.2;
  std::vector<CurveSample> samples;  // increasing theta
  int order = 3;                     // local Lagrange interpolation order
  // Interpolated Theta at theta (flagged samples skipped). Throws DomainError outside the samples.
  double eval(double theta) const;
};

// Samples the curve at `thetas` (sorted internally). For infinity curves Theta_hat_0 = -h.
SectionCurve trace_curve(CurveSource src, const std::vector<double>& thetas, double mu, double h, double delta,
                         const ManifoldConfig& cfg);
void write_section_curve_csv(std::ostream& os, const SectionCurve& c);

// d_+ = Theta^s_inf - Theta^u_{S+} on Sigma^>, d_- = Theta^u_inf - Theta^s_{S-} on Sigma^<, at h = -Theta_hat_0.
// Throws NumericalFailure when either trace fails or passes near P2.
double distance(double theta, int which, double mu, double Theta_hat_0, double delta, const ManifoldConfig& cfg);

struct IntersectionResult {
  bool found = false;
  double theta = 0.0;
  double slope = 0.0;
  double noise = 0.0;
  bool transversal = false;
  int evaluations = 0;
  std::string diagnostic;
};

IntersectionResult find_transverse_intersection(int which, double mu, double Theta_hat_0, double delta,
                                                std::array<double, 2> bracket, const ManifoldConfig& cfg);

std::string intersection_json(const IntersectionResult& r, int which, double mu, double Theta_hat_0, double delta);

}  // namespace pcrtbp
