#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace homwave {

// Resolved run parameters.  Loaded from a JSON config file, overridable by
// CLI flags; the canonical serialization (and its hash) identifies a run.
struct RunConfig {
  std::string space_path;
  std::string format = "coords";  // coords | matrix | graph
  std::string weights_path;
  std::string space_id = "space";
  std::optional<double> snowflake_eps;

  double delta = 0.25;
  std::optional<int> k_min;
  std::optional<int> k_max;
  bool strict_delta = false;

  int mc_samples = 256;
  std::uint64_t seed_lattice = 1;
  std::uint64_t seed_splines = 2;
  std::uint64_t seed_experiments = 3;

  double tol_exact = 1e-12;
  double tol_basis = 1e-8;
  double tol_invsqrt = 1e-10;
  double tol_cross = 1e-7;
  double tol_isometry = 1e-10;
  double recheck_slack = 1.05;
  double sign_slack = 1.0;
  double domination_s = 0.5;
  int neumann_max_dim = 320;

  int profile_samples = 2000;
  int recheck_samples = 800;
  int atom_count = 100;
  int molecule_count = 100;
  int decompose_count = 50;
  int weak_functions = 20;
  int weak_thresholds = 20;
  int khintchine_vectors = 50;
  int khintchine_trials = 2000;
  int sign_fields = 5;
  int sign_trials = 200;
  int cz_draws = 5;
  int equivalence_family = 100;

  int threads = 1;
  std::string out_dir = "out";

  void validate() const;
  std::string canonical_json() const;
  std::uint64_t hash() const;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text);
};

struct CheckRecord {
  std::string name;    // unique check id, e.g. "splines.partition"
  std::string anchor;  // stable claim id the check certifies
  std::string status;  // "pass" | "fail" | "info"
  std::map<std::string, double> values;
  std::string note;
};

struct Report {
  std::string space_id;
  std::string config_hash;  // 16 hex digits
  std::string version = "1.0.0";
  std::vector<CheckRecord> checks;

  void add_pass(const std::string& name, const std::string& anchor, bool ok,
                std::map<std::string, double> values, std::string note = "");
  void add_info(const std::string& name, const std::string& anchor,
                std::map<std::string, double> values, std::string note = "");

  bool all_pass() const;
  std::size_t fail_count() const;
  std::string to_json() const;  // deterministic byte-stable serialization
  std::string to_csv() const;   // long format: name,anchor,status,key,value
};

std::string hash_hex(std::uint64_t h);

}  // namespace homwave
