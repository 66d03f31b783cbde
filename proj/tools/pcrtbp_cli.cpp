// Command-line front end: one subcommand per computation, each writing into --out with a manifest.

#include <fmt/core.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <random>
#include <sstream>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"
#include "pcrtbp/io.hpp"
#include "pcrtbp/localmap.hpp"
#include "pcrtbp/manifolds.hpp"
#include "pcrtbp/melnikov.hpp"
#include "pcrtbp/search.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace pcrtbp;

namespace {

// Exit codes.
constexpr int ok_code = 0, numerical_code = 1, config_code = 2;

struct NumericalResultFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json budget_json(const QuadratureBudget& b) {
  return {{"c", b.c},
          {"C", b.C},
          {"tol", b.tol},
          {"exclusion", b.exclusion},
          {"derivative_tail", b.derivative_tail == TailModel::Sharp ? "sharp" : "majorant"}};
}

json eval_json(const MelnikovEval& e) {
  return {{"theta", e.theta},       {"value", e.value},           {"err", e.err},
          {"lo", e.lo()},           {"hi", e.hi()},               {"quad_err", e.quad_err},
          {"inner_tail", e.inner_tail}, {"outer_tail", e.outer_tail}};
}

std::string csv_of(const std::vector<MelnikovEval>& v) {
  std::ostringstream os;
  CsvWriter w(os, {"theta", "value", "err"});
  for (const auto& e : v) w.row({e.theta, e.value, e.err});
  return os.str();
}

const char* plot_melnikov_py = R"PY(import csv, sys, os
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

d = os.path.dirname(os.path.abspath(__file__))
def load(name):
    with open(os.path.join(d, name)) as f:
        rows = list(csv.DictReader(f))
    return [float(r["theta"]) for r in rows], [float(r["value"]) for r in rows], [float(r["err"]) for r in rows]

fig, ax = plt.subplots(1, 2, figsize=(11, 4))
for a, name, label in ((ax[0], "melnikov_value.csv", "M+(theta)"), (ax[1], "melnikov_derivative.csv", "M+'(theta)")):
    t, v, e = load(name)
    a.plot(t, v, ".", ms=1)
    a.fill_between(t, [x - y for x, y in zip(v, e)], [x + y for x, y in zip(v, e)], alpha=0.3, lw=0)
    a.axhline(0, color="k", lw=0.5)
    a.set_xlabel("theta")
    a.set_title(label)
fig.tight_layout()
fig.savefig(os.path.join(d, "melnikov.png"), dpi=150)
)PY";

const char* plot_distance_py = R"PY(import csv, os
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

d = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(d, "distance_quotients.csv")) as f:
    rows = list(csv.DictReader(f))
t = [float(r["theta"]) for r in rows]
fig, ax = plt.subplots(1, 2, figsize=(11, 4))
ax[0].plot(t, [float(r["M_plus"]) for r in rows], "k+", label="M+(theta + w)")
ax[0].plot(t, [float(r["quotient_mu"]) for r in rows], "o", mfc="none", label="quotient, mu")
ax[0].plot(t, [float(r["quotient_10mu"]) for r in rows], "x", label="quotient, 10 mu")
ax[0].legend()
ax[1].semilogy(t, [abs(float(r["err_mu"])) for r in rows], "o", label="mu")
ax[1].semilogy(t, [abs(float(r["err_10mu"])) for r in rows], "x", label="10 mu")
ax[1].set_title("|quotient - M+|")
ax[1].legend()
fig.tight_layout()
fig.savefig(os.path.join(d, "distance.png"), dpi=150)
)PY";

const char* plot_transit_py = R"PY(import csv, os
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

d = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(d, "transit.csv")) as f:
    rows = list(csv.DictReader(f))
nu = [float(r["nu"]) for r in rows]
fig, ax = plt.subplots(1, 2, figsize=(11, 4))
ax[0].loglog(nu, [abs(float(r["iota_out"]) + n) for r, n in zip(rows, nu)], "o")
ax[0].set_title("|iota_out + nu|")
ax[1].loglog(nu, [float(r["s_min"]) for r in rows], "o")
ax[1].set_title("closest approach s_min")
for a in ax:
    a.set_xlabel("nu")
fig.tight_layout()
fig.savefig(os.path.join(d, "transit.png"), dpi=150)
)PY";

const char* plot_eco_py = R"PY(import csv, glob, os
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

d = os.path.dirname(os.path.abspath(__file__))
fig, ax = plt.subplots(figsize=(6, 6))
for name in sorted(glob.glob(os.path.join(d, "eco_k*.csv"))):
    with open(name) as f:
        rows = list(csv.DictReader(f))
    ax.plot([float(r["q1"]) for r in rows], [float(r["q2"]) for r in rows], lw=0.5, label=os.path.basename(name))
ax.set_aspect("equal")
ax.legend()
fig.savefig(os.path.join(d, "ecos.png"), dpi=150)
)PY";

// ---- subcommands ----

void cmd_melnikov_scan(const RunConfig& c, RunManifest& m) {
  std::vector<double> grid;
  for (int i = 0; i < c.scan_n; ++i) {
    const double th = c.scan_theta_min + (c.scan_theta_max - c.scan_theta_min) * i / c.scan_n;
    if (admissible(th, c.exclusion)) grid.push_back(th);
  }
  if (grid.empty()) throw ConfigError("melnikov-scan: the scan range lies inside the excluded window");
  QuadratureBudget qb = c.quad;
  qb.exclusion = c.exclusion;
  m.write("melnikov_value.csv", csv_of(melnikov_scan(ScanKind::Value, grid, qb)));
  m.write("melnikov_derivative.csv", csv_of(melnikov_scan(ScanKind::Derivative, grid, qb)));

  // M_+'(0) against the reference enclosure, with both tail models
  const double ref_lo = -5.15341, ref_hi = -4.56572;
  json rep{{"reference", {{"lo", ref_lo}, {"hi", ref_hi}}}};
  for (TailModel tm : {TailModel::Majorant, TailModel::Sharp}) {
    QuadratureBudget b = qb;
    b.derivative_tail = tm;
    const MelnikovEval e = melnikov_plus_derivative(0.0, b);
    json j = eval_json(e);
    j["budget"] = budget_json(b);
    j["width"] = 2 * e.err;
    j["width_ok"] = 2 * e.err <= 0.6;
    j["value_inside_reference"] = e.value >= ref_lo && e.value <= ref_hi;
    j["negative"] = e.hi() < 0;
    rep[tm == TailModel::Sharp ? "sharp" : "majorant"] = j;
  }
  rep["selected"] = qb.derivative_tail == TailModel::Sharp ? "sharp" : "majorant";
  m.write("derivative_at_zero.json", rep.dump(2) + "\n");

  if (c.cert_n > 0) {
    QuadratureBudget cb = c.quad;
    cb.derivative_tail = c.cert_tail;
    const CertifyReport r = certify_sign(b_plus(), c.cert_n, cb, CertifyMode::Lipschitz, c.cert_exclusion);
    m.write("certify_B_plus.json", certify_report_json(r) + "\n");
    if (!r.all_certified || !r.zero_negative) m.set_status("uncertified");
    std::cerr << fmt::format("certification: {} of {} subintervals, worst margin {:.4g}, {:.1f} s\n",
                             r.intervals.size() - r.uncertified.size(), r.intervals.size(), r.worst_margin, r.seconds);
  }
  m.write("plot_melnikov.py", plot_melnikov_py);
}

void cmd_distance(const RunConfig& c, RunManifest& m) {
  const double w = w_sigma(c.delta);
  std::vector<double> thetas = c.distance_thetas;
  for (double th : thetas)
    if (!admissible(th + w, c.exclusion))
      throw ConfigError(fmt::format("distance: theta = {} falls in the excluded window", th));
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> U(-pi, pi);
  for (int n = 0; n < c.distance_random;) {
    const double th = U(rng);
    if (admissible(th + w, c.exclusion)) {
      thetas.push_back(th);
      ++n;
    }
  }
  const double Th0 = c.Theta_hat_0 ? *c.Theta_hat_0 : -c.energy();
  ManifoldConfig mc;
  mc.integ = integ_for(c, mc.integ);
  mc.exclusion = c.exclusion;
  QuadratureBudget qb = c.quad;
  qb.exclusion = c.exclusion;
  qb.C = c.distance_quad_C;
  const std::array<double, 2> mus{c.mu, 10 * c.mu};
  check_mu(mus[1]);

  struct Row {
    double theta, M, M_err, q[2];
  };
  std::vector<Row> rows(thetas.size());
  tbb::parallel_for(std::size_t{0}, thetas.size(), [&](std::size_t i) {
    const MelnikovEval e = melnikov_plus(thetas[i] + w, qb);
    rows[i] = {thetas[i], e.value, e.err, {0, 0}};
    for (int k = 0; k < 2; ++k)
      rows[i].q[k] = (distance(thetas[i], +1, mus[k], Th0, c.delta, mc) - Th0) / mus[k];
  });

  std::ostringstream os;
  CsvWriter cw(os, {"theta", "M_plus", "M_err", "quotient_mu", "err_mu", "quotient_10mu", "err_10mu", "ratio"});
  double max_err[2] = {0, 0};
  for (const Row& r : rows) {
    const double e0 = r.q[0] - r.M, e1 = r.q[1] - r.M;
    max_err[0] = std::max(max_err[0], std::abs(e0));
    max_err[1] = std::max(max_err[1], std::abs(e1));
    cw.row({r.theta, r.M, r.M_err, r.q[0], e0, r.q[1], e1, std::abs(e1 / e0)});
  }
  m.write("distance_quotients.csv", os.str());
  const json s{{"mu", c.mu},
               {"Theta_hat_0", Th0},
               {"delta", c.delta},
               {"w_sigma", w},
               {"angles", thetas.size()},
               {"max_err_mu", max_err[0]},
               {"max_err_10mu", max_err[1]},
               {"max_err_over_mu", max_err[0] / c.mu},
               {"decade_ratio", max_err[1] / max_err[0]},
               {"melnikov_budget", budget_json(qb)}};
  m.write("distance_summary.json", s.dump(2) + "\n");
  m.write("plot_distance.py", plot_distance_py);
}

void cmd_eco(const RunConfig& c, RunManifest& m) {
  EcoSearchConfig ec;
  ec.delta = c.delta;
  ec.seeds = c.eco_seeds;
  ec.theta_bar_start = c.eco_theta_bar_start;
  ec.window_spacing = c.eco_window_spacing;
  ec.record = true;
  ec.manifold.integ = integ_for(c, ec.manifold.integ);
  EcoSearch s = find_ecos(c.mu, c.energy(), c.eco_k_max, ec);
  json motions = json::array();
  for (EcoOrbit& e : s.orbits) {
    const std::string name = fmt::format("eco_k{}.csv", e.k);
    std::ostringstream os;
    CsvWriter w(os, {"t", "q1", "q2", "p1", "p2", "chart"});
    for (const HybridSample& x : e.trajectory)
      w.row({fmt_double(x.t), fmt_double(x.q.q1), fmt_double(x.q.q2), fmt_double(x.q.p1), fmt_double(x.q.p2),
             std::string(chart_name(x.chart))});
    m.write(name, os.str());
    e.trajectory_path = name;
    const double horizon = 2 * e.t_flight + 100;
    motions.push_back({{"k", e.k},
                       {"forward", final_motion_name(classify_final_motion(eco_motion_trace(e, +1, ec), horizon))},
                       {"backward", final_motion_name(classify_final_motion(eco_motion_trace(e, -1, ec), horizon))}});
  }
  json j = json::parse(eco_search_json(s));
  j["final_motions"] = motions;
  j["mu"] = c.mu;
  j["h"] = c.energy();
  j["delta"] = c.delta;
  m.write("ecos.json", j.dump(2) + "\n");
  m.write("plot_eco.py", plot_eco_py);
  if (s.orbits.empty()) throw NumericalResultFailure("eco: no ejection-collision orbit found");
}

void cmd_triple(const RunConfig& c, RunManifest& m) {
  TripleConfig tc;
  tc.manifold.integ = integ_for(c, tc.manifold.integ);
  const TripleIntersectionResult r = find_triple_energy(c.triple_mu, c.triple_delta, tc);
  m.write("triple.json", triple_json(r) + "\n");
  if (!r.ok) throw NumericalResultFailure("triple: " + r.diagnostic);
}

void cmd_localmap(const RunConfig& c, RunManifest& m) {
  ManifoldConfig mc;
  mc.integ = integ_for(c, mc.integ);
  const TransitReport r = verify_transition_estimates(c.localmap_delta, default_nu_grid(c.localmap_delta, c.localmap_n),
                                                      c.mu, c.energy(), c.localmap_z0, c.localmap_z1, mc);
  std::ostringstream os;
  write_transit_csv(os, r);
  m.write("transit.csv", os.str());
  m.write("transit_report.json", transit_report_json(r) + "\n");
  m.write("plot_transit.py", plot_transit_py);
  for (const auto& row : r.rows)
    if (!row.ok) throw NumericalResultFailure("localmap: " + row.diagnostic);
}

Chart chart_from_name(const std::string& s) {
  for (Chart ch : {Chart::Cartesian, Chart::PolarCM, Chart::PolarP1, Chart::Infinity, Chart::Regularized,
                   Chart::Reduced})
    if (s == chart_name(ch)) return ch;
  throw ConfigError("integrate.chart: unknown chart '" + s + "'");
}

void cmd_integrate(const RunConfig& c, RunManifest& m) {
  ChartState st{chart_from_name(c.integrate_chart), {}};
  if (static_cast<int>(c.integrate_state.size()) != chart_dim(st.chart))
    throw ConfigError(fmt::format("integrate.state: chart {} needs {} entries", chart_name(st.chart), chart_dim(st.chart)));
  for (std::size_t i = 0; i < c.integrate_state.size(); ++i) st.x[i] = c.integrate_state[i];
  // the reduced chart carries the energy in rho; elsewhere it is read off the state
  const double h = st.chart == Chart::Reduced ? c.energy() : hamiltonian(st, c.mu, 0.0);
  const IntegratorConfig ic = integ_for(c, IntegratorConfig{});
  const Trajectory tr = integrate(field_for_chart(st.chart), st, 0.0, c.integrate_t1, c.mu, h, ic);
  std::ostringstream a, b;
  write_trajectory_csv(a, tr);
  m.write("trajectory.csv", a.str());
  write_cartesian_csv(b, tr);
  m.write("trajectory_cartesian.csv", b.str());
  const FinalMotion fm = classify_final_motion(motion_trace(tr), c.integrate_horizon);
  const json s{{"chart", chart_name(st.chart)},
               {"mu", c.mu},
               {"h", h},
               {"status", status_name(tr.status)},
               {"diagnostic", tr.diagnostic},
               {"steps", tr.steps},
               {"max_drift", tr.max_abs_drift()},
               {"final_motion", final_motion_name(fm)},
               {"horizon", c.integrate_horizon}};
  m.write("integrate_summary.json", s.dump(2) + "\n");
  if (tr.status != FlowStatus::Completed && tr.status != FlowStatus::Collision)
    throw NumericalResultFailure(fmt::format("integrate: {} {}", status_name(tr.status), tr.diagnostic));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar circular restricted three-body problem: Melnikov certification, invariant manifolds, "
               "ejection-collision orbits"};
  std::string config_path, out_dir, threads_opt, seed_opt;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "run directory (default: config key out)");
  app.add_option("--threads", threads_opt, "worker threads (0: all)");
  app.add_option("--seed", seed_opt, "seed for sampled angles");
  app.add_option("--set", sets, "override a config key, key=value (repeatable)");
  app.require_subcommand(1, 1);
  const std::vector<std::pair<std::string, void (*)(const RunConfig&, RunManifest&)>> cmds{
      {"melnikov-scan", cmd_melnikov_scan}, {"distance", cmd_distance}, {"eco", cmd_eco},
      {"triple", cmd_triple},               {"localmap", cmd_localmap}, {"integrate", cmd_integrate}};
  const std::map<std::string, std::string> help{
      {"melnikov-scan", "M+ and M+' over the admissible circle, M+'(0) report, sign certification on B+"},
      {"distance", "quotient (d+ - Theta_hat_0)/mu against M+(theta + w) at mu and 10 mu"},
      {"eco", "ejection-collision orbits with growing excursions"},
      {"triple", "energy of the triple intersection and the angle ordering"},
      {"localmap", "transition map estimates near collision"},
      {"integrate", "integrate one orbit in a chart and classify its final motion"}};
  for (const auto& [name, fn] : cmds) app.add_subcommand(name, help.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return config_code;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  RunConfig cfg;
  try {
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) kv = run_config_from(load_run_config(config_path).raw).raw;
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (!threads_opt.empty()) kv["threads"] = threads_opt;
    if (!seed_opt.empty()) kv["seed"] = seed_opt;
    if (!out_dir.empty()) kv["out"] = out_dir;
    cfg = run_config_from(kv);
    validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_code;
  }

  std::unique_ptr<tbb::global_control> gc;
  if (cfg.threads > 0)
    gc = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism, cfg.threads);

  RunManifest man(cfg.out, cmd, cfg);
  int code = ok_code;
  try {
    for (const auto& [name, fn] : cmds)
      if (name == cmd) fn(cfg, man);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    man.set_status("config_error");
    code = config_code;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    man.set_status("config_error");
    code = config_code;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    man.write("failure.json", json{{"command", cmd}, {"diagnostic", e.what()}}.dump(2) + "\n");
    man.set_status("numerical_failure");
    code = numerical_code;
  }
  const fs::path mp = man.finish();
  std::cout << mp.string() << "\n";
  return code;
}
