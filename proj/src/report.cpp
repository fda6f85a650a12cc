#include "homwave/report.hpp"

#include <cmath>
#include <set>

#include "homwave/common.hpp"
#include "homwave/io.hpp"
#include "json.hpp"

namespace homwave {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  ordered_json sp;
  sp["path"] = c.space_path;
  sp["format"] = c.format;
  sp["weights"] = c.weights_path;
  sp["id"] = c.space_id;
  if (c.snowflake_eps) sp["snowflake_eps"] = *c.snowflake_eps;
  j["space"] = sp;
  j["delta"] = c.delta;
  if (c.k_min) j["k_min"] = *c.k_min;
  if (c.k_max) j["k_max"] = *c.k_max;
  j["strict_delta"] = c.strict_delta;
  j["mc_samples"] = c.mc_samples;
  j["seeds"] = {{"lattice", c.seed_lattice},
                {"splines", c.seed_splines},
                {"experiments", c.seed_experiments}};
  j["tolerances"] = {{"exact", c.tol_exact},
                     {"basis", c.tol_basis},
                     {"inv_sqrt", c.tol_invsqrt},
                     {"cross", c.tol_cross},
                     {"isometry", c.tol_isometry},
                     {"recheck_slack", c.recheck_slack},
                     {"sign_slack", c.sign_slack},
                     {"domination_s", c.domination_s}};
  j["neumann_max_dim"] = c.neumann_max_dim;
  j["experiments"] = {{"profile_samples", c.profile_samples},
                      {"recheck_samples", c.recheck_samples},
                      {"atoms", c.atom_count},
                      {"molecules", c.molecule_count},
                      {"decompose_atoms", c.decompose_count},
                      {"weak_functions", c.weak_functions},
                      {"weak_thresholds", c.weak_thresholds},
                      {"khintchine_vectors", c.khintchine_vectors},
                      {"khintchine_trials", c.khintchine_trials},
                      {"sign_fields", c.sign_fields},
                      {"sign_trials", c.sign_trials},
                      {"cz_draws", c.cz_draws},
                      {"equivalence_family", c.equivalence_family}};
  // threads and the output directory are run placement, not analysis
  // parameters; they stay out of the identity so reports from different
  // worker counts can be compared byte for byte.
  return j;
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& target) {
  if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  require(!space_path.empty(), "config: space path is required");
  require(format == "coords" || format == "matrix" || format == "graph",
          "config: unknown space format: " + format);
  require(delta > 0.0 && delta <= 0.5, "config: delta must lie in (0, 1/2]");
  if (strict_delta)
    require(delta <= 1.0 / 96.0,
            "config: strict mode needs delta <= 1/96, got " +
                std::to_string(delta));
  require(mc_samples >= 1, "config: mc_samples must be positive");
  require(threads >= 1, "config: threads must be positive");
  require(tol_exact > 0 && tol_basis > 0 && tol_invsqrt > 0 && tol_cross > 0 &&
              tol_isometry > 0,
          "config: tolerances must be positive");
  require(recheck_slack >= 1.0, "config: recheck slack must be >= 1");
  require(sign_slack >= 0.0, "config: sign_slack must be >= 0");
  require(domination_s > 0.0 && domination_s < 1.0,
          "config: domination_s must lie in (0, 1)");
  require(neumann_max_dim >= 1, "config: neumann_max_dim must be positive");
  if (k_min && k_max)
    require(*k_min <= *k_max, "config: k_min must not exceed k_max");
  if (snowflake_eps)
    require(*snowflake_eps > 0.0 && *snowflake_eps <= 1.0,
            "config: snowflake exponent must lie in (0, 1]");
}

std::string RunConfig::canonical_json() const {
  return config_to_json(*this).dump();
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical_json()); }

RunConfig RunConfig::from_file(const std::string& path) {
  return from_json_text(read_text_file(path));
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  if (j.contains("space")) {
    const auto& sp = j.at("space");
    read_if(sp, "path", c.space_path);
    read_if(sp, "format", c.format);
    read_if(sp, "weights", c.weights_path);
    read_if(sp, "id", c.space_id);
    if (sp.contains("snowflake_eps") && !sp.at("snowflake_eps").is_null())
      c.snowflake_eps = sp.at("snowflake_eps").get<double>();
  }
  read_if(j, "delta", c.delta);
  if (j.contains("k_min") && !j.at("k_min").is_null())
    c.k_min = j.at("k_min").get<int>();
  if (j.contains("k_max") && !j.at("k_max").is_null())
    c.k_max = j.at("k_max").get<int>();
  read_if(j, "strict_delta", c.strict_delta);
  read_if(j, "mc_samples", c.mc_samples);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    read_if(s, "lattice", c.seed_lattice);
    read_if(s, "splines", c.seed_splines);
    read_if(s, "experiments", c.seed_experiments);
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    read_if(t, "exact", c.tol_exact);
    read_if(t, "basis", c.tol_basis);
    read_if(t, "inv_sqrt", c.tol_invsqrt);
    read_if(t, "cross", c.tol_cross);
    read_if(t, "isometry", c.tol_isometry);
    read_if(t, "recheck_slack", c.recheck_slack);
    read_if(t, "sign_slack", c.sign_slack);
    read_if(t, "domination_s", c.domination_s);
  }
  read_if(j, "neumann_max_dim", c.neumann_max_dim);
  if (j.contains("experiments")) {
    const auto& e = j.at("experiments");
    read_if(e, "profile_samples", c.profile_samples);
    read_if(e, "recheck_samples", c.recheck_samples);
    read_if(e, "atoms", c.atom_count);
    read_if(e, "molecules", c.molecule_count);
    read_if(e, "decompose_atoms", c.decompose_count);
    read_if(e, "weak_functions", c.weak_functions);
    read_if(e, "weak_thresholds", c.weak_thresholds);
    read_if(e, "khintchine_vectors", c.khintchine_vectors);
    read_if(e, "khintchine_trials", c.khintchine_trials);
    read_if(e, "sign_fields", c.sign_fields);
    read_if(e, "sign_trials", c.sign_trials);
    read_if(e, "cz_draws", c.cz_draws);
    read_if(e, "equivalence_family", c.equivalence_family);
  }
  read_if(j, "threads", c.threads);
  read_if(j, "out", c.out_dir);
  return c;
}

void Report::add_pass(const std::string& name, const std::string& anchor,
                      bool ok, std::map<std::string, double> values,
                      std::string note) {
  checks.push_back(
      {name, anchor, ok ? "pass" : "fail", std::move(values), std::move(note)});
}

void Report::add_info(const std::string& name, const std::string& anchor,
                      std::map<std::string, double> values, std::string note) {
  checks.push_back({name, anchor, "info", std::move(values), std::move(note)});
}

bool Report::all_pass() const { return fail_count() == 0; }

std::size_t Report::fail_count() const {
  std::size_t n = 0;
  for (const auto& c : checks)
    if (c.status == "fail") ++n;
  return n;
}

std::string Report::to_json() const {
  std::set<std::string> seen;
  for (const auto& c : checks)
    require(seen.insert(c.name).second, "duplicate check name: " + c.name);
  ordered_json j;
  j["version"] = version;
  j["space"] = space_id;
  j["config_hash"] = config_hash;
  ordered_json arr = ordered_json::array();
  for (const auto& c : checks) {
    ordered_json rec;
    rec["name"] = c.name;
    rec["anchor"] = c.anchor;
    rec["status"] = c.status;
    ordered_json vals = ordered_json::object();
    for (const auto& [k, v] : c.values) {
      require(std::isfinite(v) || c.status == "info",
              "non-finite value in pass-class check " + c.name + ": " + k);
      vals[k] = v;
    }
    rec["values"] = vals;
    rec["note"] = c.note;
    arr.push_back(rec);
  }
  j["checks"] = arr;
  return j.dump(2) + "\n";
}

std::string Report::to_csv() const {
  std::string out = "name,anchor,status,key,value\n";
  for (const auto& c : checks) {
    if (c.values.empty())
      out += c.name + "," + c.anchor + "," + c.status + ",,\n";
    for (const auto& [k, v] : c.values) {
      out += c.name + "," + c.anchor + "," + c.status + "," + k + "," +
             nlohmann::json(v).dump() + "\n";
    }
  }
  return out;
}

std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

}  // namespace homwave
