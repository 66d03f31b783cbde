#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/flow.hpp"
#include "pcrtbp/melnikov.hpp"

namespace pcrtbp {

inline constexpr const char* artifact_version = "1.0.0";

// 17 significant digits, '.' decimal.
std::string fmt_double(double x);

// RFC 4180 field quoting (only when needed).
std::string csv_field(const std::string& s);

class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& os_;
  std::size_t width_;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& p);

// Flat "key = value" text with dotted namespaces; '#' starts a comment.
// Duplicate keys and malformed lines raise ConfigError.
std::map<std::string, std::string> parse_flat_config(const std::string& text);

struct RunConfig {
  double mu = 1e-3;
  std::optional<double> h;            // exactly one of h, Theta_hat_0 may be set
  std::optional<double> Theta_hat_0;
  double delta = 0.2;
  IntegratorConfig integ;
  QuadratureBudget quad;
  double exclusion = 0.45;  // window half-width for scans and distances
  // melnikov-scan
  int scan_n = 10000;
  double scan_theta_min = -pi, scan_theta_max = pi;
  int cert_n = 10000;
  double cert_exclusion = 0.3;
  TailModel cert_tail = TailModel::Sharp;
  // distance
  std::vector<double> distance_thetas{-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 1.5, 2.0, 2.5};
  int distance_random = 0;  // extra admissible angles drawn with `seed`
  double distance_quad_C = 1e4;  // outer cutoff for the Melnikov reference values
  // eco
  int eco_k_max = 3;
  int eco_seeds = 200;
  double eco_theta_bar_start = 2.0;
  double eco_window_spacing = 0.01;
  // triple
  double triple_mu = 1e-4;
  double triple_delta = 0.1;
  // localmap
  double localmap_delta = 0.1;
  int localmap_n = 13;
  double localmap_z0 = 0.0, localmap_z1 = 0.0;
  // integrate
  std::string integrate_chart = "cartesian";
  std::vector<double> integrate_state{0.5, 0.0, 0.0, 0.9};
  double integrate_t1 = 100.0;
  double integrate_horizon = 100.0;
  // run
  std::uint64_t seed = 1;
  int threads = 0;  // 0: library default
  std::string out = "out";
  std::map<std::string, std::string> raw;  // the keys as given, for the manifest

  double energy() const { return h ? *h : (Theta_hat_0 ? -*Theta_hat_0 : 0.0); }
};

// Unknown keys raise ConfigError.
RunConfig run_config_from(const std::map<std::string, std::string>& kv);
RunConfig load_run_config(const std::filesystem::path& p);
// Checks every module precondition that can be checked before dispatch.
void validate(const RunConfig& c);
// `base` with the integ.* keys present in the config applied; modules keep their own defaults otherwise.
IntegratorConfig integ_for(const RunConfig& c, IntegratorConfig base);

struct ManifestEntry {
  std::string path;  // relative to the run directory
  std::uintmax_t bytes = 0;
  std::string sha256;
};

// Collects outputs of a run; the manifest is written last and lists every other file.
class RunManifest {
 public:
  RunManifest(std::filesystem::path dir, std::string command, const RunConfig& cfg);
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }
  // Writes `content` to dir/name and records it.
  void write(const std::string& name, const std::string& content);
  void add(const std::string& name);
  void set_status(const std::string& status) { status_ = status; }
  const std::vector<ManifestEntry>& entries() const { return entries_; }
  // Writes manifest.json; returns its path.
  std::filesystem::path finish();

 private:
  std::filesystem::path dir_;
  std::string command_;
  std::map<std::string, std::string> config_;
  std::string started_;
  std::string status_ = "ok";
  std::vector<ManifestEntry> entries_;
};

std::string utc_timestamp();

// Cartesian samples of a trajectory: t, q1, q2, p1, p2.
void write_cartesian_csv(std::ostream& os, const Trajectory& tr);

}  // namespace pcrtbp
