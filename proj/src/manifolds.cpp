#include "pcrtbp/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>
#include <tbb/parallel_for.h>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"
#include "pcrtbp/melnikov.hpp"
#include "pcrtbp/quadrature.hpp"
#include "pcrtbp/rootfind.hpp"

namespace pcrtbp {

void validate(const SectionSpec& s, double mu) {
  check_mu(mu);
  if (!(s.delta > 0 && s.delta < 1)) throw ConfigError("section: delta must lie in (0, 1)");
  const double rs = s.delta * s.delta;
  if (!(rs > mu && rs < 1.0 - mu)) throw ConfigError("section: need mu < delta^2 < 1 - mu");
  if (s.branch != 1 && s.branch != -1) throw ConfigError("section: branch must be +1 or -1");
}

namespace {

void validate(const ManifoldConfig& c) {
  validate(c.integ);
  if (!(c.s0 > 0 && c.s0 <= 1e-2)) throw ConfigError("manifolds: s0 must lie in (0, 1e-2]");
  if (!(c.r_hat0 >= 10)) throw ConfigError("manifolds: r_hat0 must be at least 10");
  if (!(c.quad_span > 0)) throw ConfigError("manifolds: quad_span must be positive");
  if (c.max_iter < 2) throw ConfigError("manifolds: max_iter must be at least 2");
}

// R on the section from the energy. About P1 the Hamiltonian is R^2/2 + b R + H(R = 0).
double section_R(double r, double theta, double Theta, double mu, double h, int sign) {
  auto H = [&](double R) { return hamiltonian(Polar{Center::P1, r, theta, R, Theta}, mu); };
  const double H0 = H(0.0);
  const double b = 0.5 * (H(1.0) - H(-1.0));
  const double disc = b * b - 2.0 * (H0 - h);
  if (!(disc > 0)) throw NumericalFailure("section point has no real R");
  const double R = -b + sign * std::sqrt(disc);
  if ((R > 0 ? 1 : -1) != sign) throw NumericalFailure("section point on the wrong branch");
  return R;
}

struct RawTrace {
  bool ok = false;
  std::string diagnostic;
  ReducedState red{};
  Polar p1{};
  double tau = 0.0, t = 0.0;
  Trajectory traj;
};

RawTrace trace_raw(int circle, double theta_bar, double s0, double mu, double h, double delta,
                   const IntegratorConfig& ic) {
  RawTrace out;
  const double alpha = circle > 0 ? pi / 2 : -pi / 2;
  const ReducedState seed = make_reduced(s0, theta_bar, alpha, mu, h);
  // Linear escape rate m0/2 in tau; allow plenty of room.
  const double span = 40.0 + 4.0 * std::log(delta / s0) / (0.5 * m0_of(mu));
  std::vector<EventSpec> ev{{"section", [delta](double, const double* y) { return y[0] - delta; }, +1, true, 1}};
  out.traj = integrate(FieldId::Reduced, tag(seed), 0.0, circle > 0 ? span : -span, mu, h, ic, ev);
  const Trajectory& tr = out.traj;
  if (tr.status != FlowStatus::TerminalEvent) {
    out.diagnostic = fmt::format("collision fiber did not reach the section ({}{}{})", status_name(tr.status),
                                 tr.diagnostic.empty() ? "" : ": ", tr.diagnostic);
    return out;
  }
  const EventHit& e = tr.events.back();
  out.red = ReducedState{delta, e.y[1], e.y[2], rho_on_shell(delta, e.y[1], mu, h)};
  out.p1 = from_collision(from_reduced(out.red, mu), mu);
  out.tau = e.time;
  out.t = e.y[3];
  out.ok = true;
  return out;
}

}  // namespace

CollisionTrace trace_collision_manifold(const FiberSeed& seed, double mu, const SectionSpec& sec,
                                        const ManifoldConfig& cfg, bool richardson) {
  validate(sec, mu);
  if (seed.circle != 1 && seed.circle != -1) throw ConfigError("fiber seed: circle must be +1 or -1");
  if (!(seed.s0 > 0 && seed.s0 <= 1e-2)) throw ConfigError("fiber seed: s0 must lie in (0, 1e-2]");
  CollisionTrace out;
  out.theta_bar = seed.theta_bar;
  out.s0 = seed.s0;
  RawTrace a = trace_raw(seed.circle, seed.theta_bar, seed.s0, mu, sec.h, sec.delta, cfg.integ);
  if (!a.ok) {
    out.diagnostic = a.diagnostic;
    return out;
  }
  if ((a.p1.R > 0 ? 1 : -1) != seed.circle) {
    out.diagnostic = "section reached on the wrong branch";
    return out;
  }
  out.red = a.red;
  out.tau_section = a.tau;
  out.t_section = a.t;
  out.theta = a.p1.theta;
  out.Theta = a.p1.Theta;
  out.R = a.p1.R;
  if (richardson) {
    RawTrace b = trace_raw(seed.circle, seed.theta_bar, 0.5 * seed.s0, mu, sec.h, sec.delta, cfg.integ);
    if (!b.ok) {
      out.diagnostic = "half-offset trace: " + b.diagnostic;
      return out;
    }
    const double dth = b.p1.theta - a.p1.theta, dTh = b.p1.Theta - a.p1.Theta;
    out.richardson_shift = std::hypot(dth, dTh);
    // error linear in s0
    out.theta = b.p1.theta + dth;
    out.Theta = b.p1.Theta + dTh;
    out.R = section_R(sec.delta * sec.delta, out.theta, out.Theta, mu, sec.h, seed.circle);
    out.red = b.red;
    out.red.theta = out.theta;
    out.red.alpha = 2.0 * b.red.alpha - a.red.alpha;
    out.red.rho = rho_on_shell(sec.delta, out.theta, mu, sec.h);
  }
  out.energy_residual = hamiltonian(Polar{Center::P1, sec.delta * sec.delta, out.theta, out.R, out.Theta}, mu) - sec.h;
  out.traj = std::move(a.traj);
  out.ok = true;
  return out;
}

CollisionTrace collision_point_at(double theta, int circle, double mu, const SectionSpec& sec,
                                  const ManifoldConfig& cfg) {
  validate(cfg);
  CollisionTrace last;
  auto f = [&](double tb) {
    last = trace_collision_manifold({circle, tb, cfg.s0}, mu, sec, cfg, true);
    if (!last.ok) return std::numeric_limits<double>::quiet_NaN();
    return wrap_pi(last.theta - theta);
  };
  // zero-momentum parabola: theta moves by -w_Sigma from collision to the section
  const double x0 = theta + circle * w_sigma(sec.delta);
  double tb = x0;
  int evals = 0;
  const bool conv = secant_solve(f, x0, cfg.max_iter, cfg.angle_tol, tb, evals);
  if (!conv || !last.ok || last.theta_bar != tb) last = trace_collision_manifold({circle, tb, cfg.s0}, mu, sec, cfg, true);
  if (!conv) {
    last.ok = false;
    if (last.diagnostic.empty()) last.diagnostic = fmt::format("fiber angle secant did not converge at theta = {}", theta);
    return last;
  }
  if (last.ok) last.theta = theta + wrap_pi(last.theta - theta);
  return last;
}

double infinity_initial_Theta(double theta_hat, double w0, double Theta_hat_0, double mu, double quad_span) {
  if (mu == 0.0) return Theta_hat_0;
  const double nu = 1.0 - mu;
  // dTheta_hat/dt = dU/dtheta_hat along the zero-energy parabola r_hat = kappa s^{2/3}, theta_hat decreasing at rate 1.
  auto Uth = [&](double s) {
    const double r = kappa * std::cbrt(s * s);
    const double th = theta_hat + w0 - s;
    const double c = std::cos(th), sn = std::sin(th);
    const double d1sq = r * r + 2.0 * r * mu * c + mu * mu;
    const double d2sq = r * r - 2.0 * r * nu * c + nu * nu;
    return (1.0 - mu) * mu * r * sn / (d1sq * std::sqrt(d1sq)) - mu * nu * r * sn / (d2sq * std::sqrt(d2sq));
  };
  const QuadResult q = integrate_panels(Uth, w0, w0 + quad_span, pi / 4, 1e-14 * mu);
  return Theta_hat_0 - q.value;
}

namespace {

InfinityPoint infinity_trace(double theta_hat, int branch, double Theta_hat_0, double mu, double delta,
                             double r_hat0, const ManifoldConfig& cfg) {
  InfinityPoint out;
  out.theta_hat_init = theta_hat;
  const double h = -Theta_hat_0;
  const double w0 = std::pow(r_hat0 / kappa, 1.5);
  // W^u is the time reversal of W^s: (r, theta, R, Theta) -> (r, -theta, -R, Theta).
  const double Th = infinity_initial_Theta(branch * theta_hat, w0, Theta_hat_0, mu, cfg.quad_span);
  const double H0 = hamiltonian(Polar{Center::CM, r_hat0, theta_hat, 0.0, Th}, mu);
  if (!(h - H0 > 0)) {
    out.diagnostic = "no real R_hat at the initial point";
    return out;
  }
  const double Rh = branch * std::sqrt(2.0 * (h - H0));
  HybridConfig hc;
  hc.integ = cfg.integ;
  hc.delta = delta;
  hc.r_far = r_hat0 + 10.0;
  hc.r_far_back = r_hat0 + 5.0;
  hc.r_truncate = std::max(1000.0, 4.0 * r_hat0);
  hc.max_time = 20.0 * w0 + 100.0;
  hc.p2_guard = cfg.p2_guard;
  const HybridResult res =
      propagate(tag(Polar{Center::CM, r_hat0, theta_hat, Rh, Th}), 0.0, -branch, mu, h, hc, branch, 1);
  if (res.status == HybridStatus::NearP2) {
    out.flag = PointFlag::NearP2;
    out.diagnostic = res.diagnostic;
    return out;
  }
  if (res.status != HybridStatus::SectionReached || res.hits.empty()) {
    out.diagnostic = fmt::format("infinity trace ended with {}: {}", hybrid_status_name(res.status), res.diagnostic);
    return out;
  }
  const Polar& p = res.hits.back().p1;
  out.theta = p.theta;
  out.Theta = p.Theta;
  out.R = p.R;
  out.energy_residual = hamiltonian(p, mu) - h;
  out.flag = PointFlag::Ok;
  return out;
}

}  // namespace

InfinityPoint infinity_point_from(double theta_hat, int branch, double Theta_hat_0, double mu, double delta,
                                  const ManifoldConfig& cfg) {
  validate(cfg);
  validate(SectionSpec{delta, -Theta_hat_0, branch}, mu);
  return infinity_trace(theta_hat, branch, Theta_hat_0, mu, delta, cfg.r_hat0, cfg);
}

InfinityPoint infinity_point_at(double theta, int branch, double Theta_hat_0, double mu, double delta,
                                const ManifoldConfig& cfg) {
  validate(cfg);
  validate(SectionSpec{delta, -Theta_hat_0, branch}, mu);
  const double w0 = std::pow(cfg.r_hat0 / kappa, 1.5);
  InfinityPoint last;
  auto f = [&](double th) {
    last = infinity_trace(th, branch, Theta_hat_0, mu, delta, cfg.r_hat0, cfg);
    if (last.flag != PointFlag::Ok) return std::numeric_limits<double>::quiet_NaN();
    return wrap_pi(last.theta - theta);
  };
  const double x0 = theta - branch * (w0 - w_sigma(delta));
  double th = x0;
  int evals = 0;
  const bool conv = secant_solve(f, x0, cfg.max_iter, cfg.angle_tol, th, evals);
  if (last.flag == PointFlag::NearP2) return last;
  if (!conv || last.theta_hat_init != th) last = infinity_trace(th, branch, Theta_hat_0, mu, delta, cfg.r_hat0, cfg);
  if (!conv) {
    last.flag = PointFlag::Failed;
    if (last.diagnostic.empty()) last.diagnostic = fmt::format("initial-angle secant did not converge at theta = {}", theta);
    return last;
  }
  if (last.flag == PointFlag::Ok) last.theta = theta + wrap_pi(last.theta - theta);
  return last;
}

InfinityConvergence infinity_convergence(double theta, int branch, double Theta_hat_0, double mu, double delta,
                                         const ManifoldConfig& cfg) {
  InfinityConvergence c;
  ManifoldConfig big = cfg;
  const double w0 = std::pow(cfg.r_hat0 / kappa, 1.5);
  big.r_hat0 = kappa * std::cbrt(4.0 * w0 * w0);  // w0 doubled
  const InfinityPoint a = infinity_point_at(theta, branch, Theta_hat_0, mu, delta, cfg);
  const InfinityPoint b = infinity_point_at(theta, branch, Theta_hat_0, mu, delta, big);
  c.bound = 10.0 * mu * std::pow(w0, -1.0 / 3.0);
  if (a.flag != PointFlag::Ok || b.flag != PointFlag::Ok) {
    c.shift = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  c.shift = std::abs(b.Theta - a.Theta);
  c.ok = c.shift < c.bound;
  return c;
}

const char* curve_source_name(CurveSource s) {
  switch (s) {
    case CurveSource::UnstableSplus: return "Wu(S+)";
    case CurveSource::StableSminus: return "Ws(S-)";
    case CurveSource::StableInfinity: return "Ws(inf)";
    case CurveSource::UnstableInfinity: return "Wu(inf)";
  }
  return "?";
}

double SectionCurve::eval(double theta) const {
  std::vector<const CurveSample*> ok;
  for (const auto& s : samples)
    if (s.flag == PointFlag::Ok) ok.push_back(&s);
  if (ok.empty()) throw DomainError("section curve has no valid samples");
  if (theta < ok.front()->theta || theta > ok.back()->theta)
    throw DomainError(fmt::format("theta = {} outside the sampled range [{}, {}]", theta, ok.front()->theta,
                                  ok.back()->theta));
  const int n = static_cast<int>(ok.size());
  const int m = std::min(order + 1, n);
  auto it = std::upper_bound(ok.begin(), ok.end(), theta, [](double t, const CurveSample* s) { return t < s->theta; });
  int hi = static_cast<int>(it - ok.begin());
  int lo = std::clamp(hi - m / 2, 0, n - m);
  double acc = 0.0;
  for (int i = lo; i < lo + m; ++i) {
    double w = 1.0;
    for (int j = lo; j < lo + m; ++j)
      if (j != i) w *= (theta - ok[j]->theta) / (ok[i]->theta - ok[j]->theta);
    acc += w * ok[i]->Theta;
  }
  return acc;
}

SectionCurve trace_curve(CurveSource src, const std::vector<double>& thetas, double mu, double h, double delta,
                         const ManifoldConfig& cfg) {
  validate(cfg);
  SectionCurve c;
  c.source = src;
  c.mu = mu;
  c.h = h;
  c.delta = delta;
  std::vector<double> th = thetas;
  std::sort(th.begin(), th.end());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  c.samples.assign(th.size(), CurveSample{0, 0, 0, PointFlag::Failed});
  const int branch = (src == CurveSource::UnstableSplus || src == CurveSource::StableInfinity) ? 1 : -1;
  validate(SectionSpec{delta, h, branch}, mu);
  tbb::parallel_for(std::size_t{0}, th.size(), [&](std::size_t i) {
    CurveSample& out = c.samples[i];
    out.theta = th[i];
    try {
      if (src == CurveSource::UnstableSplus || src == CurveSource::StableSminus) {
        const CollisionTrace t = collision_point_at(th[i], branch, mu, SectionSpec{delta, h, branch}, cfg);
        if (t.ok) out = {th[i], t.Theta, t.R, PointFlag::Ok};
      } else {
        const InfinityPoint p = infinity_point_at(th[i], branch, -h, mu, delta, cfg);
        out = {th[i], p.Theta, p.R, p.flag};
      }
    } catch (const std::exception&) {
      out.flag = PointFlag::Failed;
    }
  });
  return c;
}

void write_section_curve_csv(std::ostream& os, const SectionCurve& c) {
  os << "theta,Theta,R,flag\n";
  for (const auto& s : c.samples)
    os << fmt::format("{:.17g},{:.17g},{:.17g},{}\n", s.theta, s.Theta, s.R, static_cast<int>(s.flag));
}

double distance(double theta, int which, double mu, double Theta_hat_0, double delta, const ManifoldConfig& cfg) {
  if (which != 1 && which != -1) throw ConfigError("distance: which must be +1 or -1");
  // d_- at theta mirrors d_+ at -theta, so both share the window around sqrt2/3 - w_Sigma.
  if (!admissible(which * theta + w_sigma(delta), cfg.exclusion))
    throw DomainError(fmt::format("distance: theta = {} inside the excluded window", theta));
  const double h = -Theta_hat_0;
  const CollisionTrace col = collision_point_at(theta, which, mu, SectionSpec{delta, h, which}, cfg);
  if (!col.ok) throw NumericalFailure("distance: collision manifold trace failed: " + col.diagnostic);
  const InfinityPoint inf = infinity_point_at(theta, which, Theta_hat_0, mu, delta, cfg);
  if (inf.flag != PointFlag::Ok) throw NumericalFailure("distance: infinity manifold trace failed: " + inf.diagnostic);
  return inf.Theta - col.Theta;
}

IntersectionResult find_transverse_intersection(int which, double mu, double Theta_hat_0, double delta,
                                                std::array<double, 2> bracket, const ManifoldConfig& cfg) {
  IntersectionResult r;
  auto d = [&](double th) {
    ++r.evaluations;
    return distance(th, which, mu, Theta_hat_0, delta, cfg);
  };
  double a = std::min(bracket[0], bracket[1]), b = std::max(bracket[0], bracket[1]);
  double fa, fb;
  try {
    fa = d(a);
    fb = d(b);
  } catch (const std::exception& e) {
    r.diagnostic = e.what();
    return r;
  }
  if (fa == 0.0 || fb == 0.0) {
    r.theta = fa == 0.0 ? a : b;
  } else if ((fa > 0) == (fb > 0)) {
    r.diagnostic = "no sign change on the bracket";
    return r;
  } else {
    // Illinois false position; falls back to bisection when it stalls.
    int side = 0;
    double c = a, fc = fa;
    try {
      for (int it = 0; it < 100 && b - a > 1e-11; ++it) {
        c = (a * fb - b * fa) / (fb - fa);
        if (!(c > a && c < b) || it % 4 == 3) c = 0.5 * (a + b);
        fc = d(c);
        if (fc == 0.0) break;
        if ((fc > 0) == (fb > 0)) {
          b = c;
          fb = fc;
          if (side == -1) fa *= 0.5;
          side = -1;
        } else {
          a = c;
          fa = fc;
          if (side == 1) fb *= 0.5;
          side = 1;
        }
        if (std::abs(fc) < 1e-15) break;
      }
    } catch (const std::exception& e) {
      r.diagnostic = e.what();
      return r;
    }
    r.theta = c;
  }
  try {
    const double f0 = d(r.theta);
    const double hs = 1e-4;
    const double s1 = (d(r.theta + hs) - d(r.theta - hs)) / (2 * hs);
    const double s2 = (d(r.theta + 0.5 * hs) - d(r.theta - 0.5 * hs)) / hs;
    r.slope = s2;
    r.noise = std::abs(s1 - s2) + 2.0 * std::max(std::abs(f0), 1e-13) / hs;
  } catch (const std::exception& e) {
    r.diagnostic = std::string("slope evaluation failed: ") + e.what();
    return r;
  }
  r.found = true;
  r.transversal = std::abs(r.slope) > 10.0 * r.noise;
  return r;
}

std::string intersection_json(const IntersectionResult& r, int which, double mu, double Theta_hat_0, double delta) {
  nlohmann::ordered_json j;
  j["which"] = which > 0 ? "+" : "-";
  j["mu"] = mu;
  j["Theta_hat_0"] = Theta_hat_0;
  j["delta"] = delta;
  j["found"] = r.found;
  j["theta"] = r.theta;
  j["slope"] = r.slope;
  j["noise"] = r.noise;
  j["transversal"] = r.transversal;
  j["evaluations"] = r.evaluations;
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j.dump(2);
}

}  // namespace pcrtbp
