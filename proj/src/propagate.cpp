#include "pcrtbp/propagate.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pcrtbp/errors.hpp"

namespace pcrtbp {

const char* hybrid_status_name(HybridStatus s) {
  switch (s) {
    case HybridStatus::SectionReached: return "section_reached";
    case HybridStatus::Truncated: return "truncated";
    case HybridStatus::Collision: return "collision";
    case HybridStatus::MaxTime: return "max_time";
    case HybridStatus::NearP2: return "near_p2";
    case HybridStatus::Failed: return "failed";
  }
  return "?";
}

namespace {

constexpr double tau_segment = 200.0;

Chart pick_chart(const ChartState& s, double mu, const HybridConfig& cfg) {
  const double rs = cfg.delta * cfg.delta;
  if (radius_p1(s, mu) < 2.0 * rs) return Chart::Reduced;
  if (radius_cm(s, mu) > cfg.r_far) return Chart::Infinity;
  return Chart::PolarCM;
}

}  // namespace

HybridResult propagate(const ChartState& start, double t0, int dir, double mu, double h, const HybridConfig& cfg,
                       int stop_sign, int stop_count) {
  if (dir == 0) throw ConfigError("propagate: direction must be nonzero");
  if (!(cfg.delta > 0 && cfg.delta < 1)) throw ConfigError("propagate: delta must lie in (0, 1)");
  if (!(cfg.r_far_back < cfg.r_far && cfg.r_far < cfg.r_truncate)) throw ConfigError("propagate: bad radii");
  dir = dir > 0 ? 1 : -1;
  const double rs = cfg.delta * cfg.delta;
  const double delta = cfg.delta;
  const double xi_back = std::sqrt(2.0 / cfg.r_far_back), xi_trunc = std::sqrt(2.0 / cfg.r_truncate);

  HybridResult res;
  ChartState cur;
  try {
    cur = convert(start, pick_chart(start, mu, cfg), mu, h);
  } catch (const std::exception& e) {
    res.diagnostic = e.what();
    return res;
  }
  double t = t0;
  int count = 0;
  res.r_max = radius_cm(cur, mu);

  IntegratorConfig ic = cfg.integ;
  ic.record_steps = cfg.record;
  ic.max_time = std::numeric_limits<double>::infinity();

  const int apo_dir = -dir;
  auto finish = [&](HybridStatus st, const ChartState& s) {
    res.status = st;
    res.final_state = s;
    res.t_final = t;
    if (s.chart != Chart::Reduced) res.energy_error = std::max(res.energy_error, std::abs(hamiltonian(s, mu, h) - h));
    return res;
  };

  for (int seg = 0; seg < 1'000'000; ++seg) {
    if (std::abs(t - t0) >= cfg.max_time) return finish(HybridStatus::MaxTime, cur);
    const FieldId fid = field_for_chart(cur.chart);
    std::vector<EventSpec> evs;
    double span;
    switch (cur.chart) {
      case Chart::Reduced:
        evs.push_back({"leave", [&](double, const double* y) { return y[0] - std::sqrt(2.0) * delta; }, 0, true, 1});
        evs.push_back({"section", [&](double, const double* y) { return y[0] - delta; }, 0, true, 1});
        span = tau_segment;
        break;
      case Chart::PolarCM:
        evs.push_back({"enter",
                       [&](double, const double* y) {
                         const double r = y[0];
                         return std::sqrt(r * r + 2.0 * mu * r * std::cos(y[1]) + mu * mu) - 1.5 * rs;
                       },
                       0, true, 1});
        evs.push_back({"far", [&](double, const double* y) { return y[0] - cfg.r_far; }, 0, true, 1});
        evs.push_back({"apo", [](double, const double* y) { return y[2]; }, apo_dir, false, 0});
        if (cfg.p2_guard > 0)
          evs.push_back({"p2",
                         [&](double, const double* y) {
                           const double r = y[0], nu = 1.0 - mu;
                           return std::sqrt(r * r - 2.0 * nu * r * std::cos(y[1]) + nu * nu) - cfg.p2_guard;
                         },
                         0, true, 1});
        span = cfg.max_time - std::abs(t - t0);
        break;
      case Chart::Infinity:
        evs.push_back({"near", [&](double, const double* y) { return y[0] - xi_back; }, 0, true, 1});
        evs.push_back({"truncate", [&](double, const double* y) { return y[0] - xi_trunc; }, 0, true, 1});
        evs.push_back({"apo", [](double, const double* y) { return y[2]; }, apo_dir, false, 0});
        span = cfg.max_time - std::abs(t - t0);
        break;
      default: throw DomainError("propagate: unsupported chart");
    }
    const bool tau = field_uses_tau(fid);
    const double s0 = tau ? 0.0 : t;
    Trajectory tr = integrate(fid, cur, s0, s0 + dir * span, mu, h, ic, evs);
    auto phys = [&](std::size_t i) { return tau ? t + tr.physical_time(i) : tr.times[i]; };
    auto ev_phys = [&](const EventHit& e) { return tau ? t + e.y[3] : e.time; };

    if (cfg.record)
      for (std::size_t i = 0; i < tr.states.size(); ++i) {
        // the last steps of a capture sit inside the collision chart guard
        if (cur.chart == Chart::Reduced && tr.states[i][0] * tr.states[i][0] < 1e3 * chart_guard) continue;
        res.samples.push_back({phys(i), as_cartesian(tr.state_at(i), mu, h), cur.chart});
      }
    if (cur.chart == Chart::Reduced) res.s_min = std::min(res.s_min, tr.s_min);

    const EventHit* stop_ev = nullptr;
    for (const EventHit& e : tr.events) {
      if (e.id == "apo" && !e.grazing) {
        const double r = cur.chart == Chart::Infinity ? 2.0 / (e.y[0] * e.y[0]) : e.y[0];
        res.apocentres.push_back(r);
        res.r_max = std::max(res.r_max, r);
      }
    }
    if (tr.status == FlowStatus::TerminalEvent) {
      for (auto it = tr.events.rbegin(); it != tr.events.rend(); ++it)
        if (!it->grazing && it->id != "apo") {
          stop_ev = &*it;
          break;
        }
    }
    const ChartState fin = tr.final_state();
    const double tfin = tr.times.empty() ? t : phys(tr.states.size() - 1);
    res.r_max = std::max(res.r_max, radius_cm(fin, mu));

    switch (tr.status) {
      case FlowStatus::Collision:
        t = tfin;
        res.diagnostic = tr.diagnostic;
        return finish(HybridStatus::Collision, fin);
      case FlowStatus::Completed: t = tfin; cur = fin; continue;
      case FlowStatus::TerminalEvent: break;
      default:
        t = tfin;
        res.diagnostic = fmt::format("{} in chart {}: {}", status_name(tr.status), chart_name(cur.chart), tr.diagnostic);
        return finish(HybridStatus::Failed, fin);
    }
    t = stop_ev ? ev_phys(*stop_ev) : tfin;
    if (cur.chart != Chart::Reduced)
      res.energy_error = std::max(res.energy_error, std::abs(hamiltonian(fin, mu, h) - h));
    const std::string id = stop_ev ? stop_ev->id : "";
    try {
      if (id == "section") {
        // snap onto the section so the restarted segment does not see the same crossing again
        ReducedState rd{delta, fin.x[1], fin.x[2], rho_on_shell(delta, fin.x[1], mu, h)};
        Polar p1 = from_collision(from_reduced(rd, mu), mu);
        const int sgn = p1.R >= 0 ? 1 : -1;
        res.hits.push_back({t, rd, p1, sgn});
        cur = tag(rd);
        if (stop_sign != 0 && sgn == stop_sign && ++count >= stop_count) return finish(HybridStatus::SectionReached, cur);
      } else if (id == "leave" || id == "near") {
        cur = convert(fin, Chart::PolarCM, mu, h);
        ++res.switches;
      } else if (id == "enter") {
        cur = convert(fin, Chart::Reduced, mu, h);
        ++res.switches;
      } else if (id == "far") {
        cur = convert(fin, Chart::Infinity, mu, h);
        ++res.switches;
      } else if (id == "p2") {
        res.diagnostic = fmt::format("passed within {} of P2", cfg.p2_guard);
        return finish(HybridStatus::NearP2, fin);
      } else if (id == "truncate") {
        res.kepler_energy = h + fin.x[3];
        return finish(HybridStatus::Truncated, fin);
      } else {
        cur = fin;
      }
    } catch (const std::exception& e) {
      res.diagnostic = fmt::format("chart switch after '{}' failed: {}", id, e.what());
      return finish(HybridStatus::Failed, fin);
    }
  }
  res.diagnostic = "segment limit";
  return finish(HybridStatus::Failed, cur);
}

}  // namespace pcrtbp
