#include "pcrtbp/localmap.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>
#include <tbb/parallel_for.h>

#include "pcrtbp/errors.hpp"
#include "pcrtbp/rootfind.hpp"

namespace pcrtbp {

StraightenedPoint straighten_leading(const ReducedState& p, Side side, double mu) {
  StraightenedPoint q;
  q.side = side;
  q.s = p.s;
  const double a1 = chi_a1(mu), s3 = p.s * p.s * p.s;
  if (side == Side::Minus) {
    const double beta = wrap_pi(p.alpha + pi / 2);
    q.b = beta;
    q.c = p.theta - 2.0 * beta - a1 * s3;
  } else {
    const double iota = wrap_pi(p.alpha - pi / 2);
    q.b = iota;
    q.c = p.theta - 2.0 * iota + a1 * s3;
  }
  return q;
}

ReducedState unstraighten_leading(const StraightenedPoint& p, double mu, double h) {
  const double a1 = chi_a1(mu), s3 = p.s * p.s * p.s;
  double theta, alpha;
  if (p.side == Side::Minus) {
    theta = p.c + a1 * s3 + 2.0 * p.b;
    alpha = p.b - pi / 2;
  } else {
    theta = p.c - a1 * s3 + 2.0 * p.b;
    alpha = p.b + pi / 2;
  }
  return make_reduced(p.s, theta, alpha, mu, h);
}

SectionStraightener::SectionStraightener(Side side, double mu, double h, double delta, const ManifoldConfig& cfg)
    : side_(side), mu_(mu), h_(h), delta_(delta), cfg_(cfg) {
  validate(SectionSpec{delta, h, side == Side::Minus ? -1 : 1}, mu);
}

std::array<double, 2> SectionStraightener::fiber(double c) const {
  const int circle = side_ == Side::Minus ? -1 : 1;
  const CollisionTrace t = trace_collision_manifold({circle, c, cfg_.s0}, mu_, {delta_, h_, circle}, cfg_, true);
  if (!t.ok) throw NumericalFailure("straightening fiber: " + t.diagnostic);
  const double b = circle < 0 ? t.red.alpha + pi / 2 : t.red.alpha - pi / 2;
  return {b, t.red.theta - 2.0 * b};
}

double SectionStraightener::base_of(double y) const {
  const double a1d3 = chi_a1(mu_) * delta_ * delta_ * delta_;
  const double c0 = side_ == Side::Minus ? y - a1d3 : y + a1d3;
  auto f = [&](double c) { return wrap_pi(fiber(c)[1] - y); };
  double c = c0;
  int evals = 0;
  const bool conv = secant_solve(f, c0, cfg_.max_iter, 1e-13, c, evals);
  if (!conv && !(std::abs(f(c)) < 1e-10)) throw NumericalFailure(fmt::format("no fiber through y = {}", y));
  return c;
}

StraightenedPoint SectionStraightener::to_straightened(const ReducedState& p) const {
  if (std::abs(p.s - delta_) > 1e-9 * delta_)
    throw DomainError(fmt::format("to_straightened: point has s = {}, section is s = {}", p.s, delta_));
  StraightenedPoint q;
  q.side = side_;
  q.s = delta_;
  const double b = side_ == Side::Minus ? wrap_pi(p.alpha + pi / 2) : wrap_pi(p.alpha - pi / 2);
  const double y = p.theta - 2.0 * b;
  q.c = base_of(y);
  q.b = b - fiber(q.c)[0];
  return q;
}

ReducedState SectionStraightener::from_straightened(double b, double c) const {
  const auto fb = fiber(c);
  const double bb = fb[0] + b;
  const double alpha = side_ == Side::Minus ? bb - pi / 2 : bb + pi / 2;
  return make_reduced(delta_, fb[1] + 2.0 * bb, alpha, mu_, h_);
}

TransitResult transit(double nu, double z_in, const SectionStraightener& minus, const SectionStraightener& plus,
                      const ManifoldConfig& cfg) {
  if (minus.side() != Side::Minus || plus.side() != Side::Plus) throw ConfigError("transit: straighteners swapped");
  const double delta = minus.delta();
  if (plus.delta() != delta) throw ConfigError("transit: straighteners use different sections");
  TransitResult r;
  r.nu = nu;
  r.z_in = z_in;
  r.in = {Side::Minus, delta, nu, z_in};
  if (nu == 0.0) {
    // continuous extension onto W^u(S+)
    r.out = {Side::Plus, delta, 0.0, z_in};
    r.extended = true;
    r.ok = true;
    return r;
  }
  if (!(std::abs(nu) < delta)) throw DomainError(fmt::format("transit: |nu| = {} must be below delta", std::abs(nu)));
  if (std::abs(nu) < 1e-6 * delta)
    throw DomainError(fmt::format("transit: |nu| = {} below the floor 1e-6 delta", std::abs(nu)));
  try {
    r.red_in = minus.from_straightened(nu, z_in);
  } catch (const std::exception& e) {
    r.diagnostic = e.what();
    return r;
  }
  const double sg = nu > 0 ? 1.0 : -1.0;
  const double a0 = r.red_in.alpha;
  // beta = alpha + pi/2, continued along the orbit from its initial value
  auto beta = [a0](const double* y) { return wrap_pi(a0 + pi / 2) + (y[2] - a0); };
  std::vector<EventSpec> evs{
      {"sigma1", [=](double, const double* y) { return beta(y) - sg * delta; }, nu > 0 ? 1 : -1, false, 0},
      {"sigma2", [=](double, const double* y) { return beta(y) - sg * (pi - delta); }, nu > 0 ? 1 : -1, false, 0}};
  r.traj = integrate_through_collision(r.red_in, plus.mu(), plus.h(), delta, cfg.integ, evs);
  const Trajectory& tr = r.traj;
  if (tr.status != FlowStatus::TerminalEvent) {
    r.diagnostic = fmt::format("transit did not reach the exit section ({}{}{})", status_name(tr.status),
                               tr.diagnostic.empty() ? "" : ": ", tr.diagnostic);
    return r;
  }
  bool got1 = false, got2 = false;
  for (const EventHit& e : tr.events) {
    if (e.grazing) continue;
    if (e.id == "sigma1" && !got1) {
      r.s1 = e.y[0];
      r.tau1 = e.time;
      got1 = true;
    } else if (e.id == "sigma2" && !got2) {
      r.s2 = e.y[0];
      r.tau2 = e.time;
      got2 = true;
    }
  }
  const EventHit& ex = tr.events.back();
  r.ordered = got1 && got2 && r.tau1 < r.tau2 && r.tau2 < ex.time;
  r.tau = ex.time;
  r.t = ex.y[3];
  r.s_min = tr.s_min;
  const double mu = plus.mu(), h = plus.h();
  r.red_out = ReducedState{delta, ex.y[1], ex.y[2], rho_on_shell(delta, ex.y[1], mu, h)};
  try {
    r.out = plus.to_straightened(r.red_out);
  } catch (const std::exception& e) {
    r.diagnostic = e.what();
    return r;
  }
  r.out.c = z_in + wrap_pi(r.out.c - z_in);
  r.energy_residual = std::abs(hamiltonian(from_collision(from_reduced(r.red_out, mu), mu), mu) - h);
  r.ok = true;
  return r;
}

TransitResult transit(double nu, double z_in, double mu, double h, double delta, const ManifoldConfig& cfg) {
  const SectionStraightener minus(Side::Minus, mu, h, delta, cfg), plus(Side::Plus, mu, h, delta, cfg);
  return transit(nu, z_in, minus, plus, cfg);
}

std::vector<double> default_nu_grid(double delta, int n) {
  // [1e-4 delta, delta / 10] geometrically
  std::vector<double> g(n);
  const double lo = std::log(1e-4 * delta), hi = std::log(0.1 * delta);
  for (int i = 0; i < n; ++i) g[i] = std::exp(lo + (hi - lo) * i / std::max(1, n - 1));
  return g;
}

TransitReport verify_transition_estimates(double delta, const std::vector<double>& nu_grid, double mu, double h,
                                          double z0, double z1, const ManifoldConfig& cfg) {
  TransitReport rep;
  rep.delta = delta;
  rep.mu = mu;
  rep.h = h;
  rep.z0 = z0;
  rep.z1 = z1;
  std::vector<double> nus = nu_grid;
  std::sort(nus.begin(), nus.end());
  nus.erase(std::unique(nus.begin(), nus.end()), nus.end());
  if (nus.empty() || !(nus.front() > 0) || !(nus.back() < delta))
    throw ConfigError("verify_transition_estimates: nu grid must lie in (0, delta)");
  const SectionStraightener minus(Side::Minus, mu, h, delta, cfg), plus(Side::Plus, mu, h, delta, cfg);
  auto zin = [&](double nu) { return z0 + z1 * nu; };

  rep.rows.resize(nus.size());
  tbb::parallel_for(std::size_t{0}, nus.size(), [&](std::size_t i) {
    rep.rows[i] = transit(nus[i], zin(nus[i]), minus, plus, cfg);
    rep.rows[i].traj = Trajectory{};  // keep the report light
  });

  bool all_ok = true;
  for (const auto& r : rep.rows)
    if (!r.ok) {
      all_ok = false;
      if (rep.diagnostic.empty()) rep.diagnostic = fmt::format("transit failed at nu = {}: {}", r.nu, r.diagnostic);
    }
  if (!all_ok) return rep;

  rep.monotone = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (!(rep.rows[i].out.b < rep.rows[i - 1].out.b)) rep.monotone = false;

  double num = 0, den = 0;
  for (const auto& r : rep.rows) {
    const double nu = r.nu;
    rep.C1 = std::max(rep.C1, std::abs(r.out.b + nu) / (delta * nu));
    rep.C2 = std::max(rep.C2, std::abs(r.out.c - r.z_in) / (delta * delta * nu + nu * nu));
    num += nu * r.out.b;
    den += nu * nu;
  }
  rep.iota_slope = num / den;

  // log-log slope of the w deviation over the upper half of the grid
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = rep.rows.size() / 2; i < rep.rows.size(); ++i) {
      const double dw = std::abs(rep.rows[i].out.c - rep.rows[i].z_in);
      if (!(dw > 0)) continue;
      const double x = std::log(rep.rows[i].nu), y = std::log(dw);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n;
    }
    if (n >= 2) rep.w_loglog_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }

  const double n0 = nus.front();
  const TransitResult ta = transit(n0, zin(n0), minus, plus, cfg);
  const TransitResult tb = transit(1.5 * n0, zin(1.5 * n0), minus, plus, cfg);
  if (ta.ok && tb.ok)
    rep.tangent = {0.0, (tb.out.b - ta.out.b) / (0.5 * n0), (tb.out.c - ta.out.c) / (0.5 * n0)};
  const double nf = 1e-6 * delta;
  const TransitResult tl = transit(nf, zin(nf), minus, plus, cfg);
  if (tl.ok) {
    rep.limit_error = std::max({std::abs(tl.out.s - delta), std::abs(tl.out.b), std::abs(tl.out.c - z0)});
  } else {
    rep.limit_error = std::numeric_limits<double>::infinity();
    if (rep.diagnostic.empty()) rep.diagnostic = "limit transit failed: " + tl.diagnostic;
  }
  rep.fit_ok = rep.monotone && std::isfinite(rep.C1) && std::isfinite(rep.C2) && ta.ok && tb.ok && tl.ok;
  if (!rep.monotone && rep.diagnostic.empty()) rep.diagnostic = "fit failed: iota~ is not monotone in nu";
  return rep;
}

std::string transit_report_json(const TransitReport& r) {
  nlohmann::ordered_json j;
  j["delta"] = r.delta;
  j["mu"] = r.mu;
  j["h"] = r.h;
  j["z_in"] = {{"z0", r.z0}, {"z1", r.z1}};
  j["C1"] = r.C1;
  j["C2"] = r.C2;
  j["iota_slope"] = r.iota_slope;
  j["w_loglog_slope"] = r.w_loglog_slope;
  j["tangent"] = r.tangent;
  j["limit_error"] = r.limit_error;
  j["monotone"] = r.monotone;
  j["fit_ok"] = r.fit_ok;
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& t : r.rows) {
    nlohmann::ordered_json row;
    row["nu"] = t.nu;
    row["z_in"] = t.z_in;
    row["ok"] = t.ok;
    row["iota_out"] = t.out.b;
    row["w_out"] = t.out.c;
    row["s_min"] = t.s_min;
    row["s1"] = t.s1;
    row["s2"] = t.s2;
    row["ordered"] = t.ordered;
    row["tau"] = t.tau;
    row["energy_residual"] = t.energy_residual;
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j.dump(2);
}

void write_transit_csv(std::ostream& os, const TransitReport& r) {
  os << "nu,iota_out,w_out,s_min\n";
  for (const auto& t : r.rows) os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", t.nu, t.out.b, t.out.c, t.s_min);
}

}  // namespace pcrtbp
