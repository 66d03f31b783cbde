#include "pcrtbp/io.hpp"

#include <fmt/core.h>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pcrtbp/errors.hpp"
#include "pcrtbp/manifolds.hpp"

namespace pcrtbp {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string fmt_double(double x) { return fmt::format("{:.17g}", x); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

CsvWriter::CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), width_(header.size()) {
  row(header);
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> f;
  f.reserve(values.size());
  for (double v : values) f.push_back(fmt_double(v));
  row(f);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) throw std::logic_error("CsvWriter: row width differs from header");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os_ << ',';
    os_ << csv_field(fields[i]);
  }
  os_ << '\n';
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string sha256_file(const fs::path& p) { return sha256_hex(slurp(p)); }

std::map<std::string, std::string> parse_flat_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("config line {}: expected key = value", n));
    const std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (k.empty() || v.empty()) throw ConfigError(fmt::format("config line {}: empty key or value", n));
    for (char c : k)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_'))
        throw ConfigError(fmt::format("config line {}: bad key '{}'", n, k));
    if (!kv.emplace(k, v).second) throw ConfigError(fmt::format("config line {}: duplicate key '{}'", n, k));
  }
  return kv;
}

namespace {

double to_double(const std::string& k, const std::string& v) {
  std::size_t pos = 0;
  double x;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", k, v));
  }
  if (pos != v.size() || !std::isfinite(x)) throw ConfigError(fmt::format("{}: '{}' is not a number", k, v));
  return x;
}

long to_long(const std::string& k, const std::string& v) {
  std::size_t pos = 0;
  long x;
  try {
    x = std::stol(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", k, v));
  }
  if (pos != v.size()) throw ConfigError(fmt::format("{}: '{}' is not an integer", k, v));
  return x;
}

std::vector<double> to_list(const std::string& k, const std::string& v) {
  std::vector<double> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_double(k, trim(item)));
  if (out.empty()) throw ConfigError(k + ": empty list");
  return out;
}

}  // namespace

RunConfig run_config_from(const std::map<std::string, std::string>& kv) {
  RunConfig c;
  c.raw = kv;
  for (const auto& [k, v] : kv) {
    auto D = [&] { return to_double(k, v); };
    auto I = [&] { return static_cast<int>(to_long(k, v)); };
    if (k == "mu") c.mu = D();
    else if (k == "h") c.h = D();
    else if (k == "Theta_hat_0") c.Theta_hat_0 = D();
    else if (k == "delta") c.delta = D();
    else if (k == "integ.rel_tol") c.integ.rel_tol = D();
    else if (k == "integ.abs_tol") c.integ.abs_tol = D();
    else if (k == "integ.max_steps") c.integ.max_steps = to_long(k, v);
    else if (k == "quad.c") c.quad.c = D();
    else if (k == "quad.C") c.quad.C = D();
    else if (k == "quad.tol") c.quad.tol = D();
    else if (k == "quad.derivative_tail" || k == "cert.tail") {
      TailModel m;
      if (v == "majorant") m = TailModel::Majorant;
      else if (v == "sharp") m = TailModel::Sharp;
      else throw ConfigError(k + ": expected majorant or sharp");
      (k == "cert.tail" ? c.cert_tail : c.quad.derivative_tail) = m;
    } else if (k == "exclusion") c.exclusion = D();
    else if (k == "scan.n") c.scan_n = I();
    else if (k == "scan.theta_min") c.scan_theta_min = D();
    else if (k == "scan.theta_max") c.scan_theta_max = D();
    else if (k == "cert.n") c.cert_n = I();
    else if (k == "cert.exclusion") c.cert_exclusion = D();
    else if (k == "distance.thetas") c.distance_thetas = to_list(k, v);
    else if (k == "distance.random") c.distance_random = I();
    else if (k == "distance.quad_C") c.distance_quad_C = D();
    else if (k == "eco.k_max") c.eco_k_max = I();
    else if (k == "eco.seeds") c.eco_seeds = I();
    else if (k == "eco.theta_bar_start") c.eco_theta_bar_start = D();
    else if (k == "eco.window_spacing") c.eco_window_spacing = D();
    else if (k == "triple.mu") c.triple_mu = D();
    else if (k == "triple.delta") c.triple_delta = D();
    else if (k == "localmap.delta") c.localmap_delta = D();
    else if (k == "localmap.n") c.localmap_n = I();
    else if (k == "localmap.z0") c.localmap_z0 = D();
    else if (k == "localmap.z1") c.localmap_z1 = D();
    else if (k == "integrate.chart") c.integrate_chart = v;
    else if (k == "integrate.state") c.integrate_state = to_list(k, v);
    else if (k == "integrate.t1") c.integrate_t1 = D();
    else if (k == "integrate.horizon") c.integrate_horizon = D();
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(to_long(k, v));
    else if (k == "threads") c.threads = I();
    else if (k == "out") c.out = v;
    else throw ConfigError("unknown config key '" + k + "'");
  }
  return c;
}

RunConfig load_run_config(const fs::path& p) { return run_config_from(parse_flat_config(slurp(p))); }

void validate(const RunConfig& c) {
  check_mu(c.mu);
  if (c.h && c.Theta_hat_0) throw ConfigError("set either h or Theta_hat_0, not both");
  validate(SectionSpec{c.delta, c.energy(), +1}, c.mu);
  validate(c.integ);
  validate(c.quad);
  if (!(c.exclusion >= 0 && c.exclusion < pi)) throw ConfigError("exclusion must lie in [0, pi)");
  if (!(c.cert_exclusion >= 0 && c.cert_exclusion < pi)) throw ConfigError("cert.exclusion must lie in [0, pi)");
  if (c.scan_n < 2) throw ConfigError("scan.n must be at least 2");
  if (!(c.scan_theta_min < c.scan_theta_max)) throw ConfigError("scan.theta_min must be below scan.theta_max");
  if (c.cert_n < 0) throw ConfigError("cert.n must be non-negative");
  if (c.distance_random < 0) throw ConfigError("distance.random must be non-negative");
  if (c.eco_k_max < 1 || c.eco_seeds < 4 * c.eco_k_max) throw ConfigError("eco.seeds must be at least 4 eco.k_max");
  check_mu(c.triple_mu);
  validate(SectionSpec{c.triple_delta, 0.0, +1}, c.triple_mu);
  validate(SectionSpec{c.localmap_delta, c.energy(), +1}, c.mu);
  if (c.localmap_n < 4) throw ConfigError("localmap.n must be at least 4");
  if (!(c.integrate_horizon > 0)) throw ConfigError("integrate.horizon must be positive");
  if (c.integrate_state.size() < 3 || c.integrate_state.size() > 4)
    throw ConfigError("integrate.state needs 3 (reduced) or 4 entries");
  if (!(c.distance_quad_C > c.quad.c)) throw ConfigError("distance.quad_C must exceed quad.c");
  if (c.threads < 0) throw ConfigError("threads must be non-negative");
}

IntegratorConfig integ_for(const RunConfig& c, IntegratorConfig base) {
  if (c.raw.count("integ.rel_tol")) base.rel_tol = c.integ.rel_tol;
  if (c.raw.count("integ.abs_tol")) base.abs_tol = c.integ.abs_tol;
  if (c.raw.count("integ.max_steps")) base.max_steps = c.integ.max_steps;
  return base;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest::RunManifest(fs::path dir, std::string command, const RunConfig& cfg)
    : dir_(std::move(dir)), command_(std::move(command)), config_(cfg.raw), started_(utc_timestamp()) {
  fs::create_directories(dir_);
}

void RunManifest::write(const std::string& name, const std::string& content) {
  {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (dir_ / name).string());
    out << content;
  }
  add(name);
}

void RunManifest::add(const std::string& name) {
  const fs::path p = dir_ / name;
  ManifestEntry e{name, fs::file_size(p), sha256_file(p)};
  for (auto& x : entries_)
    if (x.path == name) {
      x = e;
      return;
    }
  entries_.push_back(std::move(e));
}

fs::path RunManifest::finish() {
  json files = json::array();
  for (const auto& e : entries_) files.push_back({{"path", e.path}, {"bytes", e.bytes}, {"sha256", e.sha256}});
  const json m{{"command", command_},
               {"artifact_version", artifact_version},
               {"config", config_},
               {"started", started_},
               {"finished", utc_timestamp()},
               {"status", status_},
               {"outputs", files}};
  const fs::path p = dir_ / "manifest.json";
  std::ofstream out(p, std::ios::binary);
  out << m.dump(2) << '\n';
  return p;
}

void write_cartesian_csv(std::ostream& os, const Trajectory& tr) {
  CsvWriter w(os, {"t", "q1", "q2", "p1", "p2"});
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    const Cartesian c = as_cartesian(tr.state_at(i), tr.mu, tr.h);
    w.row({tr.physical_time(i), c.q1, c.q2, c.p1, c.p2});
  }
}

}  // namespace pcrtbp
