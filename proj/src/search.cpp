#include "pcrtbp/search.hpp"

#include <fmt/core.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"
#include "pcrtbp/localmap.hpp"
#include "pcrtbp/melnikov.hpp"
#include "pcrtbp/rootfind.hpp"

namespace pcrtbp {

namespace {

using json = nlohmann::json;

HybridConfig eco_hybrid(const EcoSearchConfig& cfg, bool record) {
  HybridConfig hc;
  hc.integ = cfg.manifold.integ;
  hc.delta = cfg.delta;
  hc.r_truncate = cfg.r_truncate;
  hc.max_time = cfg.max_time;
  hc.record = record;
  return hc;
}

EcoReturn eco_run(double theta_bar, double mu, double h, const EcoSearchConfig& cfg, bool record,
                  HybridResult* keep, double alpha0 = pi / 2) {
  EcoReturn r;
  r.theta_bar = theta_bar;
  const ChartState start = tag(make_reduced(cfg.s0, theta_bar, alpha0, mu, h));
  HybridResult res = propagate(start, 0.0, +1, mu, h, eco_hybrid(cfg, record), -1, 1);
  r.status = res.status;
  r.r_max = res.r_max;
  r.t = res.t_final;
  r.energy_error = res.energy_error;
  if (res.status == HybridStatus::SectionReached) {
    const SectionHit& hit = res.hits.back();
    r.phi = hit.red.theta;
    r.Theta = hit.p1.Theta;
    r.red = hit.red;
    r.t = hit.t;
    const CollisionTrace c = collision_point_at(hit.p1.theta, -1, mu, SectionSpec{cfg.delta, h, -1}, cfg.manifold);
    if (c.ok) {
      r.G = r.Theta - c.Theta;
      r.theta_bar_minus = c.theta_bar;
    } else {
      r.status = HybridStatus::Failed;
    }
  }
  if (keep) *keep = std::move(res);
  return r;
}

bool usable(const EcoReturn& r) { return r.status == HybridStatus::SectionReached; }

void evaluate_all(std::vector<EcoReturn>& pts, double mu, double h, const EcoSearchConfig& cfg) {
  tbb::parallel_for(std::size_t{0}, pts.size(), [&](std::size_t i) {
    try {
      pts[i] = eco_run(pts[i].theta_bar, mu, h, cfg, false, nullptr);
    } catch (const std::exception&) {
      pts[i].status = HybridStatus::Failed;
    }
  });
}

// Illinois false position on G, with a bisection every fourth step.
EcoReturn refine(EcoReturn a, EcoReturn b, double mu, double h, const EcoSearchConfig& cfg, int& evals) {
  EcoReturn best = std::abs(a.G) < std::abs(b.G) ? a : b;
  int side = 0;
  for (int it = 0; it < cfg.max_iter && std::abs(best.G) > cfg.residual_tol; ++it) {
    double x = (it % 4 == 3) ? 0.5 * (a.theta_bar + b.theta_bar)
                             : (a.theta_bar * b.G - b.theta_bar * a.G) / (b.G - a.G);
    if (!(x > std::min(a.theta_bar, b.theta_bar) && x < std::max(a.theta_bar, b.theta_bar)))
      x = 0.5 * (a.theta_bar + b.theta_bar);
    if (x == a.theta_bar || x == b.theta_bar || std::abs(b.theta_bar - a.theta_bar) < 1e-15) break;
    EcoReturn m = eco_run(x, mu, h, cfg, false, nullptr);
    ++evals;
    if (!usable(m)) break;
    if (std::abs(m.G) < std::abs(best.G)) best = m;
    if ((m.G > 0) == (a.G > 0)) {
      a = m;
      if (side == -1) b.G *= 0.5;
      side = -1;
    } else {
      b = m;
      if (side == +1) a.G *= 0.5;
      side = +1;
    }
  }
  return best;
}

}  // namespace

EcoReturn eco_return(double theta_bar, double mu, double h, const EcoSearchConfig& cfg, double alpha0) {
  return eco_run(theta_bar, mu, h, cfg, false, nullptr, alpha0);
}

ReducedState eco_landing(const EcoReturn& r, double mu, double h, const EcoSearchConfig& cfg) {
  const double s0 = cfg.manifold.s0;
  const double span = 40.0 + 4.0 * std::log(cfg.delta / s0) / (m0_of(mu) / 2);
  std::vector<EventSpec> ev{{"seed", [s0](double, const double* y) { return y[0] - s0; }, -1, true, 0}};
  IntegratorConfig ic = cfg.manifold.integ;
  ic.record_steps = false;
  const Trajectory tr = integrate(FieldId::Reduced, tag(r.red), 0.0, span, mu, h, ic, ev);
  if (tr.status != FlowStatus::TerminalEvent)
    throw NumericalFailure(fmt::format("eco_landing: s0 not reached ({})", status_name(tr.status)));
  const auto& y = tr.events.back().y;
  return make_reduced(s0, y[1], y[2], mu, h);
}

namespace {

// Roots of G over [lo, hi] from n seeds, refined where the return curve folds.
std::vector<EcoReturn> window_roots(double lo, double hi, int n, double mu, double h, const EcoSearchConfig& cfg,
                                    EcoSearch& stats) {
  std::vector<EcoReturn> pts(n);
  for (int i = 0; i < n; ++i) pts[i].theta_bar = lo + (hi - lo) * i / (n - 1);
  evaluate_all(pts, mu, h, cfg);
  stats.returns_computed += n;

  for (int pass = 0; pass < cfg.max_refine; ++pass) {
    std::vector<EcoReturn> extra;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const bool both = usable(pts[i]) && usable(pts[i + 1]);
      if (!both || std::abs(pts[i + 1].phi - pts[i].phi) > cfg.fold_dphi) {
        EcoReturn m;
        m.theta_bar = 0.5 * (pts[i].theta_bar + pts[i + 1].theta_bar);
        extra.push_back(m);
      }
    }
    if (extra.empty()) break;
    evaluate_all(extra, mu, h, cfg);
    stats.returns_computed += static_cast<int>(extra.size());
    pts.insert(pts.end(), extra.begin(), extra.end());
    std::sort(pts.begin(), pts.end(), [](const EcoReturn& a, const EcoReturn& b) { return a.theta_bar < b.theta_bar; });
  }

  std::vector<EcoReturn> roots;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const EcoReturn &a = pts[i], &b = pts[i + 1];
    if (!usable(a) || !usable(b) || std::abs(b.phi - a.phi) > cfg.fold_dphi) continue;
    if ((a.G > 0) == (b.G > 0)) continue;
    int evals = 0;
    ++stats.crossings;
    const EcoReturn r = refine(a, b, mu, h, cfg, evals);
    stats.returns_computed += evals;
    if (std::abs(r.G) <= cfg.residual_tol)
      roots.push_back(r);
    else
      ++stats.rejected;
  }
  return roots;
}

EcoOrbit make_orbit(double theta_bar, double mu, double h, const EcoSearchConfig& cfg) {
  HybridResult full;
  const EcoReturn fin = eco_run(theta_bar, mu, h, cfg, cfg.record, &full);
  EcoOrbit e;
  e.mu = mu;
  e.h = h;
  e.theta_bar_plus = fin.theta_bar;
  e.theta_bar_minus = fin.theta_bar_minus;
  e.r_max = fin.r_max;
  e.residual = std::abs(fin.G);
  e.phi = fin.phi;
  e.turns = static_cast<int>(std::lround((fin.theta_bar - fin.phi) / (2 * pi)));
  e.t_flight = fin.t;
  e.energy_error = fin.energy_error;
  e.end_error = std::numeric_limits<double>::infinity();
  if (usable(fin)) {
    try {
      e.landing = eco_landing(fin, mu, h, cfg);
      e.end_error = std::hypot(wrap_pi(e.landing.theta - fin.theta_bar_minus), wrap_pi(e.landing.alpha + pi / 2));
    } catch (const NumericalFailure&) {
    }
  } else {
    e.residual = std::numeric_limits<double>::infinity();
  }
  if (cfg.record) e.trajectory = std::move(full.samples);
  return e;
}

}  // namespace

std::vector<EcoOrbit> ecos_in_window(double lo, double hi, int n, double mu, double h, const EcoSearchConfig& cfg) {
  check_mu(mu);
  if (!(lo < hi) || n < 2) throw ConfigError("ecos_in_window: need lo < hi and n >= 2");
  EcoSearch stats;
  std::vector<EcoOrbit> out;
  for (const EcoReturn& r : window_roots(lo, hi, n, mu, h, cfg, stats)) out.push_back(make_orbit(r.theta_bar, mu, h, cfg));
  return out;
}

EcoSearch find_ecos(double mu, double h, int k_max, const EcoSearchConfig& cfg) {
  check_mu(mu);
  if (k_max < 1) throw ConfigError("find_ecos: k_max must be positive");
  if (cfg.seeds < 4 * k_max) throw ConfigError("find_ecos: too few seeds for the requested windows");
  EcoSearch out;
  const int per_window = cfg.seeds / k_max;

  for (int j = 0; j < k_max; ++j) {
    const double centre = cfg.theta_bar_start + j * cfg.window_spacing;
    // window width from the local winding rate of the return angle
    const EcoReturn c0 = eco_run(centre, mu, h, cfg, false, nullptr);
    const EcoReturn c1 = eco_run(centre + 1e-7, mu, h, cfg, false, nullptr);
    out.returns_computed += 2;
    if (!usable(c0) || !usable(c1)) {
      out.diagnostics.push_back(
          fmt::format("window {}: no return to the incoming section from theta_bar = {:.6f} ({})", j, centre,
                      hybrid_status_name(c0.status)));
      continue;
    }
    const double rate = std::abs(c1.phi - c0.phi) / 1e-7;
    const double width = cfg.window_wraps * 2 * pi / std::max(rate, 1.0);

    const std::vector<EcoReturn> roots = window_roots(centre - width / 2, centre + width / 2, per_window, mu, h, cfg, out);
    if (roots.empty()) {
      out.diagnostics.push_back(fmt::format("window {}: no crossing with the stable collision curve", j));
      continue;
    }
    const EcoReturn best =
        *std::min_element(roots.begin(), roots.end(), [](const EcoReturn& a, const EcoReturn& b) { return a.t < b.t; });
    EcoOrbit e = make_orbit(best.theta_bar, mu, h, cfg);
    if (e.residual > cfg.residual_tol)
      out.diagnostics.push_back(fmt::format("window {}: residual {:.3e} above tolerance", j, e.residual));
    if (!(e.end_error < cfg.end_tol))
      out.diagnostics.push_back(fmt::format("window {}: landing error {:.3e}", j, e.end_error));
    out.orbits.push_back(std::move(e));
  }

  std::sort(out.orbits.begin(), out.orbits.end(),
            [](const EcoOrbit& a, const EcoOrbit& b) { return a.t_flight < b.t_flight; });
  for (std::size_t i = 0; i < out.orbits.size(); ++i) out.orbits[i].k = static_cast<int>(i) + 1;
  if (static_cast<int>(out.orbits.size()) < k_max)
    out.diagnostics.push_back(fmt::format("found {} of {} requested orbits", out.orbits.size(), k_max));
  return out;
}

namespace {

json eco_to_json(const EcoOrbit& e) {
  json j{{"mu", e.mu},
         {"h", e.h},
         {"k", e.k},
         {"theta_bar_plus", e.theta_bar_plus},
         {"theta_bar_minus", e.theta_bar_minus},
         {"r_max", e.r_max},
         {"residual", e.residual},
         {"return_angle", e.phi},
         {"turns", e.turns},
         {"crossing", "first return to the incoming section"},
         {"t_flight", e.t_flight},
         {"end_error", e.end_error},
         {"energy_error", e.energy_error}};
  if (!e.trajectory_path.empty()) j["trajectory"] = e.trajectory_path;
  return j;
}

}  // namespace

std::string eco_json(const EcoOrbit& e) { return eco_to_json(e).dump(2); }

std::string eco_search_json(const EcoSearch& s) {
  json arr = json::array();
  for (const auto& e : s.orbits) arr.push_back(eco_to_json(e));
  return json{{"orbits", arr},
              {"diagnostics", s.diagnostics},
              {"returns_computed", s.returns_computed},
              {"crossings", s.crossings},
              {"rejected", s.rejected}}
      .dump(2);
}

// ---- triple intersection ----

namespace {

struct TripleEval {
  bool ok = false;
  std::string diagnostic;
  double theta_gt = 0, theta_lt = 0, theta_gt_u = 0;
  double d_plus_slope = 0;
  double G = 0;
};

Polar section_p1(const ReducedState& r, double mu, double h) { return as_polar(tag(r), Center::P1, mu, h); }

TripleEval triple_eval(double Theta_hat_0, double mu, double delta, const TripleConfig& cfg,
                       const SectionStraightener& minus, const SectionStraightener& plus) {
  TripleEval ev;
  const std::array<double, 2> br{-cfg.bracket, cfg.bracket};
  const IntersectionResult gt = find_transverse_intersection(+1, mu, Theta_hat_0, delta, br, cfg.manifold);
  const IntersectionResult lt = find_transverse_intersection(-1, mu, Theta_hat_0, delta, br, cfg.manifold);
  if (!gt.found || !lt.found) {
    ev.diagnostic = fmt::format("intersection not found ({} / {})", gt.diagnostic, lt.diagnostic);
    return ev;
  }
  ev.theta_gt = gt.theta;
  ev.theta_lt = lt.theta;
  ev.d_plus_slope = gt.slope;
  const double h = -Theta_hat_0;
  const CollisionTrace p_lt = collision_point_at(lt.theta, -1, mu, SectionSpec{delta, h, -1}, cfg.manifold);
  if (!p_lt.ok) {
    ev.diagnostic = "stable collision point: " + p_lt.diagnostic;
    return ev;
  }
  const StraightenedPoint in = minus.to_straightened(p_lt.red);
  // p_< lies on W^s(S-), so its image is given by the continuous extension
  const TransitResult tr = transit(0.0, in.c, minus, plus, cfg.manifold);
  const ReducedState out = plus.from_straightened(tr.out.b, tr.out.c);
  const Polar q = section_p1(out, mu, h);
  ev.theta_gt_u = gt.theta + wrap_pi(q.theta - gt.theta);
  ev.G = ev.theta_gt_u - ev.theta_gt;
  ev.ok = true;
  return ev;
}

// Image on Sigma^> of the W^u(infinity) point of Sigma^< at section angle theta.
Polar image_of_unstable_infinity(double theta, double Theta_hat_0, double mu, double delta, const TripleConfig& cfg,
                                 const SectionStraightener& minus, const SectionStraightener& plus) {
  const double h = -Theta_hat_0;
  const InfinityPoint p = infinity_point_at(theta, -1, Theta_hat_0, mu, delta, cfg.manifold);
  if (p.flag != PointFlag::Ok) throw NumericalFailure("unstable infinity point: " + p.diagnostic);
  const ReducedState red = as_reduced(tag(Polar{Center::P1, delta * delta, p.theta, p.R, p.Theta}), mu, h);
  const StraightenedPoint in = minus.to_straightened(red);
  const TransitResult tr = transit(in.b, in.c, minus, plus, cfg.manifold);
  if (!tr.ok) throw NumericalFailure("transit: " + tr.diagnostic);
  return section_p1(tr.red_out, mu, h);
}

double signed_angle(double from_slope, double to_slope) {
  return std::atan2(to_slope - from_slope, 1.0 + from_slope * to_slope);
}

}  // namespace

TripleIntersectionResult find_triple_energy(double mu, double delta, const TripleConfig& cfg) {
  check_mu(mu);
  validate(SectionSpec{delta, 0.0, +1}, mu);
  TripleIntersectionResult res;
  res.mu = mu;
  res.delta = delta;
  QuadratureBudget qb;
  qb.exclusion = cfg.manifold.exclusion;
  res.M_plus_0 = melnikov_plus(0.0, qb).value;

  // the straighteners depend on h; rebuilt per evaluation
  auto eval = [&](double x) {
    const double Th0 = x * mu;
    const SectionStraightener minus(Side::Minus, mu, -Th0, delta, cfg.manifold);
    const SectionStraightener plus(Side::Plus, mu, -Th0, delta, cfg.manifold);
    return triple_eval(Th0, mu, delta, cfg, minus, plus);
  };

  // unknown x = Theta_hat_0 / mu, started from the first-order law
  double x = -res.M_plus_0;
  int evals = 0;
  std::string last_diag;
  auto f = [&](double xx) {
    try {
      const TripleEval e = eval(xx);
      if (!e.ok) {
        last_diag = e.diagnostic;
        return std::numeric_limits<double>::quiet_NaN();
      }
      return e.G;
    } catch (const std::exception& ex) {
      last_diag = ex.what();
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  bool conv = secant_solve(f, x, cfg.max_iter, cfg.tol, x, evals);
  if (!conv) {
    // bracket fallback: scan outward from the first-order value, then bisect
    const double x0 = -res.M_plus_0;
    double a = x0, fa = f(a), b = a, fb = fa;
    ++evals;
    bool bracketed = false;
    for (double step = 0.1; step <= 0.8 && !bracketed; step += 0.1) {
      for (double sgn : {+1.0, -1.0}) {
        b = x0 + sgn * step;
        fb = f(b);
        ++evals;
        if (std::isfinite(fa) && std::isfinite(fb) && (fa > 0) != (fb > 0)) {
          bracketed = true;
          break;
        }
      }
    }
    if (!bracketed) {
      res.diagnostic = "triple condition not bracketed near the first-order energy: " + last_diag;
      res.iterations = evals;
      return res;
    }
    for (int it = 0; it < 60 && std::abs(b - a) > 1e-9; ++it) {
      const double m = 0.5 * (a + b), fm = f(m);
      ++evals;
      if (!std::isfinite(fm)) break;
      if ((fm > 0) == (fa > 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
        fb = fm;
      }
      if (std::abs(fm) <= cfg.tol) {
        a = b = m;
        break;
      }
    }
    x = 0.5 * (a + b);
  }
  res.iterations = evals;

  const double Th0 = x * mu;
  const double h = -Th0;
  res.h_star = h;
  res.h_star_over_mu = h / mu;
  const SectionStraightener minus(Side::Minus, mu, h, delta, cfg.manifold);
  const SectionStraightener plus(Side::Plus, mu, h, delta, cfg.manifold);
  const TripleEval e = triple_eval(Th0, mu, delta, cfg, minus, plus);
  if (!e.ok) {
    res.diagnostic = e.diagnostic;
    return res;
  }
  res.theta_gt = e.theta_gt;
  res.theta_lt = e.theta_lt;
  res.theta_gt_u = e.theta_gt_u;
  res.residual = std::abs(e.G);

  try {
    const double eps = cfg.slope_eps;
    const SectionSpec sp{delta, h, +1};
    const double tg = e.theta_gt;
    const InfinityPoint s1 = infinity_point_at(tg + eps, +1, Th0, mu, delta, cfg.manifold);
    const InfinityPoint s0 = infinity_point_at(tg - eps, +1, Th0, mu, delta, cfg.manifold);
    if (s1.flag != PointFlag::Ok || s0.flag != PointFlag::Ok) throw NumericalFailure("stable infinity slope");
    res.slope_s_inf = (s1.Theta - s0.Theta) / (s1.theta - s0.theta);
    const CollisionTrace u1 = collision_point_at(tg + eps, +1, mu, sp, cfg.manifold);
    const CollisionTrace u0 = collision_point_at(tg - eps, +1, mu, sp, cfg.manifold);
    if (!u1.ok || !u0.ok) throw NumericalFailure("unstable collision slope");
    res.slope_u_splus = (u1.Theta - u0.Theta) / (u1.theta - u0.theta);
    res.d_plus_slope = res.slope_s_inf - res.slope_u_splus;
    res.d_minus_slope = (distance(tg + eps, -1, mu, Th0, delta, cfg.manifold) -
                         distance(tg - eps, -1, mu, Th0, delta, cfg.manifold)) /
                        (2 * eps);
    const Polar q1 = image_of_unstable_infinity(e.theta_lt + eps, Th0, mu, delta, cfg, minus, plus);
    const Polar q0 = image_of_unstable_infinity(e.theta_lt - eps, Th0, mu, delta, cfg, minus, plus);
    res.slope_u_inf = (q1.Theta - q0.Theta) / wrap_pi(q1.theta - q0.theta);
  } catch (const std::exception& ex) {
    res.diagnostic = std::string("slopes: ") + ex.what();
    return res;
  }
  res.A = signed_angle(res.slope_u_inf, res.slope_s_inf);
  res.B = signed_angle(res.slope_u_inf, res.slope_u_splus);
  res.angles_ok = -pi / 2 < res.A && res.A < res.B && res.B < 0;
  res.slopes_ok = std::abs(res.d_plus_slope + res.d_minus_slope) <= 0.1 * std::abs(res.d_plus_slope);
  res.ok = res.residual <= cfg.tol;
  if (!res.ok) res.diagnostic = fmt::format("residual {:.3e} above tolerance", res.residual);
  return res;
}

std::string triple_json(const TripleIntersectionResult& r) {
  return json{{"ok", r.ok},
              {"diagnostic", r.diagnostic},
              {"mu", r.mu},
              {"delta", r.delta},
              {"h_star", r.h_star},
              {"h_star_over_mu", r.h_star_over_mu},
              {"M_plus_0", r.M_plus_0},
              {"theta_gt", r.theta_gt},
              {"theta_lt", r.theta_lt},
              {"theta_gt_u", r.theta_gt_u},
              {"residual", r.residual},
              {"slope_s_inf", r.slope_s_inf},
              {"slope_u_splus", r.slope_u_splus},
              {"slope_u_inf", r.slope_u_inf},
              {"d_plus_slope", r.d_plus_slope},
              {"d_minus_slope", r.d_minus_slope},
              {"A", r.A},
              {"B", r.B},
              {"angles_ok", r.angles_ok},
              {"slopes_ok", r.slopes_ok},
              {"iterations", r.iterations}}
      .dump(2);
}

// ---- final motions ----

const char* final_motion_name(FinalMotion m) {
  switch (m) {
    case FinalMotion::H: return "H";
    case FinalMotion::P: return "P";
    case FinalMotion::B: return "B";
    case FinalMotion::OS: return "OS";
    case FinalMotion::COLLISION: return "COLLISION";
    case FinalMotion::UNDECIDED: return "UNDECIDED";
  }
  return "?";
}

namespace {

MotionSample sample_of(double t, const Cartesian& c) {
  const double r = std::hypot(c.q1, c.q2);
  // q' = p + J q, so r r' = q . p
  return {t, r, r > 0 ? (c.q1 * c.p1 + c.q2 * c.p2) / r : 0.0};
}

}  // namespace

MotionTrace motion_trace(const HybridResult& res) {
  MotionTrace m;
  m.samples.reserve(res.samples.size());
  for (const auto& s : res.samples) m.samples.push_back(sample_of(s.t, s.q));
  m.collided = res.status == HybridStatus::Collision;
  return m;
}

MotionTrace motion_trace(const Trajectory& tr) {
  MotionTrace m;
  m.samples.reserve(tr.states.size());
  for (std::size_t i = 0; i < tr.states.size(); ++i)
    m.samples.push_back(sample_of(tr.physical_time(i), as_cartesian(tr.state_at(i), tr.mu, tr.h)));
  m.collided = tr.status == FlowStatus::Collision;
  return m;
}

MotionTrace eco_motion_trace(const EcoOrbit& e, int dir, const EcoSearchConfig& cfg) {
  if (dir > 0) {
    HybridResult full;
    const EcoReturn r = eco_run(e.theta_bar_plus, e.mu, e.h, cfg, true, &full);
    MotionTrace m = motion_trace(full);
    m.collided = false;
    if (usable(r)) {
      try {
        const ReducedState l = eco_landing(r, e.mu, e.h, cfg);
        m.collided = std::hypot(wrap_pi(l.theta - r.theta_bar_minus), wrap_pi(l.alpha + pi / 2)) < cfg.end_tol;
      } catch (const NumericalFailure&) {
      }
    }
    return m;
  }
  HybridConfig hc = eco_hybrid(cfg, true);
  hc.max_time = 10.0;
  const ChartState start = tag(make_reduced(cfg.s0, e.theta_bar_plus, pi / 2, e.mu, e.h));
  return motion_trace(propagate(start, 0.0, -1, e.mu, e.h, hc, 0));
}

FinalMotion classify_final_motion(const MotionTrace& tr, double horizon) {
  if (tr.collided) return FinalMotion::COLLISION;
  if (tr.samples.empty()) return FinalMotion::UNDECIDED;
  const double t0 = tr.samples.front().t;
  std::vector<MotionSample> s;
  for (const auto& x : tr.samples)
    if (std::abs(x.t - t0) <= horizon) s.push_back(x);
  const MotionSample& last = s.back();

  // r increasing over the final quarter of the samples
  bool increasing = s.size() >= 2;
  for (std::size_t i = s.size() - std::max<std::size_t>(1, s.size() / 4); i < s.size(); ++i)
    if (i > 0 && !(s[i].r > s[i - 1].r)) increasing = false;

  if (last.r > 100 && last.rdot > 0.1 && increasing) return FinalMotion::H;
  if (last.r > 100 && std::abs(last.rdot) < 0.02) return FinalMotion::P;

  double sup = 0;
  int reentries = 0;
  bool armed = false;
  for (const auto& x : s) {
    sup = std::max(sup, x.r);
    if (x.r > 50) armed = true;
    if (armed && x.r < 5) {
      ++reentries;
      armed = false;
    }
  }
  if (sup < 50) return FinalMotion::B;
  if (reentries >= 2) return FinalMotion::OS;
  return FinalMotion::UNDECIDED;
}

}  // namespace pcrtbp
