#pragma once

#include <string>
#include <vector>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/manifolds.hpp"
#include "pcrtbp/propagate.hpp"

namespace pcrtbp {

// ---- ejection-collision orbits ----

struct EcoSearchConfig {
  double delta = 0.2;
  double s0 = 1e-4;
  // Windows of ejection fibers: window j is centred at theta_bar_start + j * window_spacing and
  // spans window_wraps turns of the return angle.
  double theta_bar_start = 2.0;
  double window_spacing = 0.01;
  double window_wraps = 1.5;
  int seeds = 200;            // split evenly across the windows
  double fold_dphi = 0.5;     // adjacent returns further apart than this are refined
  int max_refine = 8;
  double residual_tol = 5e-9;  // return-map noise is ~3e-9 at the default tolerances
  int max_iter = 60;
  double end_tol = 1e-4;      // landing on the stable collision seed, same scale as s0
  double r_truncate = 5000.0;
  double max_time = 1e6;
  bool record = false;        // keep Cartesian samples of each orbit
  ManifoldConfig manifold = [] {
    ManifoldConfig m;
    m.integ.rel_tol = 1e-13;
    m.integ.abs_tol = 1e-13;
    return m;
  }();
};

// First return to Sigma^< of the orbit ejected along the unstable fiber theta_bar.
struct EcoReturn {
  HybridStatus status = HybridStatus::Failed;
  double theta_bar = 0.0;
  double phi = 0.0;    // return angle, lifted along the orbit
  double Theta = 0.0;  // angular momentum at the return
  double G = 0.0;      // Theta - Theta^s_{S-}(phi)
  double theta_bar_minus = 0.0;
  double r_max = 0.0;
  double t = 0.0;
  double energy_error = 0.0;
  ReducedState red{};
};

// alpha0 = pi/2 is the seed of the unstable fiber; other values start the orbit off the fiber at s0.
EcoReturn eco_return(double theta_bar, double mu, double h, const EcoSearchConfig& cfg, double alpha0 = pi / 2);

// Continues a return in the reduced chart down to s = cfg.manifold.s0. Throws NumericalFailure if
// s0 is not reached.
ReducedState eco_landing(const EcoReturn& r, double mu, double h, const EcoSearchConfig& cfg);

struct EcoOrbit {
  double mu = 0.0, h = 0.0;
  double theta_bar_plus = 0.0;   // ejection fiber
  double theta_bar_minus = 0.0;  // collision fiber
  int k = 0;
  double r_max = 0.0;
  double residual = 0.0;  // |G| on Sigma^<
  double phi = 0.0;       // lifted return angle
  int turns = 0;          // full turns of the return angle relative to the ejection fiber
  double t_flight = 0.0;  // ejection seed to the return section
  double end_error = 0.0; // distance of the landing point to the stable seed (s0, theta_bar_minus, -pi/2)
  ReducedState landing{};  // where the orbit crosses s = s0 on its way into the collision
  double energy_error = 0.0;
  std::vector<HybridSample> trajectory;
  std::string trajectory_path;  // set by the caller once written
};

struct EcoSearch {
  std::vector<EcoOrbit> orbits;
  std::vector<std::string> diagnostics;
  int returns_computed = 0;
  int crossings = 0;  // sign changes of G seen
  int rejected = 0;   // crossings whose refinement stalled above residual_tol (steep P2 passages)
};

// Returns at most k_max orbits, one per window, ordered by flight time. Windows without a
// crossing leave a diagnostic.
EcoSearch find_ecos(double mu, double h, int k_max, const EcoSearchConfig& cfg = {});

// Every refined crossing in [lo, hi] from n seeds (k left at 0).
std::vector<EcoOrbit> ecos_in_window(double lo, double hi, int n, double mu, double h, const EcoSearchConfig& cfg = {});

std::string eco_json(const EcoOrbit& e);
std::string eco_search_json(const EcoSearch& s);

// ---- triple intersection ----

struct TripleConfig {
  ManifoldConfig manifold = [] {
    ManifoldConfig m;
    m.exclusion = 0.3;
    return m;
  }();
  double bracket = 0.15;   // section angles searched in [-bracket, bracket]
  double tol = 1e-6;       // on theta^u_> - theta_>
  int max_iter = 20;
  double slope_eps = 2e-3; // finite-difference step for the section slopes
};

struct TripleIntersectionResult {
  bool ok = false;
  std::string diagnostic;
  double mu = 0.0, delta = 0.0;
  double h_star = 0.0;
  double h_star_over_mu = 0.0;
  double M_plus_0 = 0.0;
  double theta_gt = 0.0;    // theta_>
  double theta_lt = 0.0;    // theta_<
  double theta_gt_u = 0.0;  // image of p_< under the extended transition map
  double residual = 0.0;
  // slopes at p_>: W^s(infinity), W^u(S+), image of W^u(infinity)
  double slope_s_inf = 0.0, slope_u_splus = 0.0, slope_u_inf = 0.0;
  double d_plus_slope = 0.0, d_minus_slope = 0.0;
  double A = 0.0, B = 0.0;
  bool angles_ok = false;
  bool slopes_ok = false;  // d_+' = -d_-' within 10%
  int iterations = 0;
};

TripleIntersectionResult find_triple_energy(double mu, double delta, const TripleConfig& cfg = {});
std::string triple_json(const TripleIntersectionResult& r);

// ---- final motions ----

enum class FinalMotion { H, P, B, OS, COLLISION, UNDECIDED };
const char* final_motion_name(FinalMotion m);

struct MotionSample {
  double t, r, rdot;  // distance to the centre of mass and its rate
};

struct MotionTrace {
  std::vector<MotionSample> samples;
  bool collided = false;
};

// From a recorded propagation (cfg.record = true).
MotionTrace motion_trace(const HybridResult& res);
// From a Cartesian trajectory.
MotionTrace motion_trace(const Trajectory& tr);

// Motion of an ECO in time direction dir. Backwards the ejection seed is integrated into the
// collision; forwards the orbit is followed to the return, and the capture is the landing on the
// stable collision seed within cfg.end_tol (the stable fiber reaches the collision in finite time).
MotionTrace eco_motion_trace(const EcoOrbit& e, int dir, const EcoSearchConfig& cfg = {});

// Samples beyond `horizon` (elapsed time) are ignored.
FinalMotion classify_final_motion(const MotionTrace& tr, double horizon);

}  // namespace pcrtbp
