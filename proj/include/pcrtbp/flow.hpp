#pragma once

#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "pcrtbp/charts.hpp"
#include "pcrtbp/fields.hpp"

namespace pcrtbp {

struct IntegratorConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double max_time = std::numeric_limits<double>::infinity();  // cap on |elapsed integration time|
  double event_tol = 1e-12;                                    // on |g| at a located event
  long max_steps = 20'000'000;
  bool record_steps = true;  // keep every accepted step (first/last/events are always kept)
};

void validate(const IntegratorConfig& c);

// Right-hand side on a flat buffer: dy = f(t, y).
using Rhs = std::function<void(double t, const double* y, double* dy)>;

// Dormand-Prince 8(5,3) with 7th-order dense output.
class Dop853 {
 public:
  Dop853(int n, Rhs f, double rel_tol, double abs_tol);

  void reset(double t0, const double* y0);
  // Attempts one step towards t_end; returns false on step-size underflow.
  // Rejected trials are retried internally.
  bool step(double t_end, double max_step);

  double t() const { return t_; }
  double t_old() const { return told_; }
  const std::vector<double>& y() const { return y_; }
  const std::vector<double>& y_old() const { return yold_; }
  long accepted() const { return naccept_; }
  long rejected() const { return nreject_; }
  long evaluations() const { return nfev_; }

  // Dense output on [t_old, t]; prepare_dense() must be called once per accepted step.
  void prepare_dense();
  void dense(double t, double* out) const;

 private:
  void stages(double h);
  double error_norm(double h) const;
  double initial_step(double hmax, double dir);
  bool eval(double t, const double* y, double* dy);

  int n_;
  Rhs f_;
  double rtol_, atol_;
  double t_ = 0, told_ = 0, h_ = 0, last_h_ = 0, facold_ = 1e-4;
  bool have_h_ = false, dense_ready_ = false, reject_ = false;
  long naccept_ = 0, nreject_ = 0, nfev_ = 0;
  std::vector<double> y_, yold_, ynew_, tmp_;
  std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, k8_, k9_, k10_, knew_;
  std::vector<double> rc_[8];
};

struct EventSpec {
  std::string id;
  std::function<double(double t, const double* y)> g;
  int direction = 0;  // +1: g increasing, -1: decreasing, 0: any
  bool terminal = false;
  int max_hits = 0;  // terminal events stop after max(1, max_hits) transversal hits
};

struct EventHit {
  std::string id;
  double time;
  std::vector<double> y;
  int direction;
  bool grazing;
};

enum class FlowStatus { Completed, TerminalEvent, Collision, StepUnderflow, MaxTime, MaxSteps, DomainExit };

const char* status_name(FlowStatus s);

struct Trajectory {
  FieldId field = FieldId::Cartesian;
  double mu = 0, h = 0;
  std::vector<double> times;               // integration variable (t or tau)
  std::vector<std::vector<double>> states;  // chart coordinates, then physical t for tau-fields
  std::vector<double> drift;               // first-integral deviation from the initial value
  std::vector<EventHit> events;
  FlowStatus status = FlowStatus::Completed;
  std::string diagnostic;
  double s_min = std::numeric_limits<double>::infinity();  // reduced/regularized only
  long steps = 0;

  ChartState state_at(std::size_t i) const;
  ChartState final_state() const { return state_at(states.size() - 1); }
  double physical_time(std::size_t i) const;
  double max_abs_drift() const;
};

// Integrates field `id` from state0 over [t0, t1] (t1 < t0 integrates backwards).
// output_times (optional) are filled by dense output into `sampled`.
Trajectory integrate(FieldId id, const ChartState& state0, double t0, double t1, double mu, double h,
                     const IntegratorConfig& cfg, const std::vector<EventSpec>& events = {},
                     const std::vector<double>& output_times = {},
                     std::vector<std::vector<double>>* sampled = nullptr);

// Reduced-chart passage near the Sun: from 0 < s < 2 delta forward in tau until s = delta
// with s increasing. Capture below s = 1e-10 ends with FlowStatus::Collision.
inline constexpr double collision_floor = 1e-10;
Trajectory integrate_through_collision(const ReducedState& start, double mu, double h, double delta,
                                       const IntegratorConfig& cfg,
                                       const std::vector<EventSpec>& extra_events = {});

// CSV: header (time, chart fields, [t], drift), one row per stored step, 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

}  // namespace pcrtbp
