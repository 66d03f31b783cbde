#pragma once

#include <string>
#include <vector>

#include "pcrtbp/charts.hpp"
#include "pcrtbp/flow.hpp"

namespace pcrtbp {

// Chart-switching propagation of a single orbit through the near-collision region
// (reduced chart), the middle region (polar about the centre of mass) and the far
// region (infinity chart). Switching uses hysteresis bands:
//   reduced -> polar_cm at r_p1 > 2 r*, back below 1.5 r*;
//   polar_cm -> infinity at r > r_far, back below r_far_back.
struct HybridConfig {
  IntegratorConfig integ;
  double delta = 0.2;  // section r_p1 = delta^2
  double r_far = 50.0;
  double r_far_back = 40.0;
  double r_truncate = 1000.0;
  double max_time = 1e6;  // physical time
  bool record = false;    // keep Cartesian samples of every accepted step
  double p2_guard = 0.0;  // stop when closer than this to P2 (0 disables)
};

enum class HybridStatus { SectionReached, Truncated, Collision, MaxTime, NearP2, Failed };
const char* hybrid_status_name(HybridStatus s);

struct SectionHit {
  double t;           // physical time
  ReducedState red;   // s = delta; theta keeps its lift along the orbit
  Polar p1;           // same point in polar coordinates about the Sun
  int R_sign;         // sign of R: +1 on the outgoing section, -1 on the incoming one
};

struct HybridSample {
  double t;
  Cartesian q;
  Chart chart;
};

struct HybridResult {
  HybridStatus status = HybridStatus::Failed;
  std::string diagnostic;
  std::vector<SectionHit> hits;
  std::vector<double> apocentres;  // distance to the centre of mass at R_hat = 0 crossings
  double r_max = 0.0;              // over the whole run, centre-of-mass distance
  double t_final = 0.0;
  ChartState final_state{};
  double energy_error = 0.0;   // |H - h| at the end
  double kepler_energy = 0.0;  // h + Theta_hat at truncation (sign classifies escape)
  double s_min = 1.0;          // closest reduced-chart approach to the Sun
  int switches = 0;
  std::vector<HybridSample> samples;
};

// Integrates from `start` (any chart) in the direction sign(dir) of physical time
// until the `stop_count`-th transversal crossing of r_p1 = delta^2 whose R has sign
// `stop_sign` (0: never stop on the section), truncation at r_truncate,
// collision capture, or max_time. Starting exactly on the section does not count.
HybridResult propagate(const ChartState& start, double t0, int dir, double mu, double h, const HybridConfig& cfg,
                       int stop_sign, int stop_count = 1);

}  // namespace pcrtbp
