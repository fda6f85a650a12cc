#include "homwave/space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

#include "homwave/rng.hpp"

namespace homwave {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& tok : out) {
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.erase(tok.begin());
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.pop_back();
  }
  return out;
}

double parse_double(const std::string& tok, const std::string& path, int line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(path + ":" + std::to_string(line_no) + ": cannot parse '" + tok + "' as a number");
  }
}

}  // namespace

MetricMeasureSpace::MetricMeasureSpace(Eigen::MatrixXd dist, Eigen::VectorXd weights,
                                       std::vector<std::string> ids,
                                       std::vector<Eigen::VectorXd> coords, int threads)
    : dist_(std::move(dist)), weights_(std::move(weights)), ids_(std::move(ids)),
      coords_(std::move(coords)) {
  const int n = static_cast<int>(weights_.size());
  require(n >= 1, "space must contain at least one point");
  require(dist_.rows() == n && dist_.cols() == n,
          "distance matrix shape does not match the weight count");
  if (ids_.empty()) {
    ids_.resize(n);
    for (int i = 0; i < n; ++i) ids_[i] = std::to_string(i);
  }
  require(static_cast<int>(ids_.size()) == n, "id count does not match the weight count");
  total_mass_ = weights_.sum();
  diameter_ = (n > 1) ? dist_.maxCoeff() : 0.0;
  min_gap_ = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (dist_(i, j) > 0.0) min_gap_ = std::min(min_gap_, dist_(i, j));
  if (!std::isfinite(min_gap_)) min_gap_ = 0.0;
  validate(threads);
  build_index(threads);
}

void MetricMeasureSpace::validate(int threads) const {
  const int n = size();
  for (int i = 0; i < n; ++i) {
    require(std::isfinite(weights_(i)) && weights_(i) > 0.0,
            "weight of point " + ids_[i] + " must be finite and positive");
    require(dist_(i, i) == 0.0, "nonzero diagonal distance at point " + ids_[i]);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = dist_(i, j);
      require(std::isfinite(d), "non-finite distance between " + ids_[i] + " and " + ids_[j]);
      require(d == dist_(j, i), "asymmetric distance between " + ids_[i] + " and " + ids_[j]);
      require(d > 0.0, "distinct points " + ids_[i] + " and " + ids_[j] + " at distance zero");
    }
  }
  const double tol = 1e-9 * std::max(1.0, diameter_);
  auto check_triple = [&](int i, int j, int k) {
    const double lhs = dist_(i, k);
    const double rhs = dist_(i, j) + dist_(j, k);
    if (lhs > rhs + tol)
      throw Error("triangle inequality violated beyond tolerance at points " + ids_[i] + ", " +
                  ids_[j] + ", " + ids_[k]);
  };
  if (n <= 300) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) check_triple(i, j, k);
  } else {
    // Seeded spot check: one million random triples, fixed internal seed.
    (void)threads;
    Rng rng(0x5eed5eedull);
    for (std::size_t t = 0; t < 1000000; ++t) {
      const int i = static_cast<int>(rng.below(n));
      const int j = static_cast<int>(rng.below(n));
      const int k = static_cast<int>(rng.below(n));
      check_triple(i, j, k);
    }
  }
}

void MetricMeasureSpace::build_index(int threads) {
  const int n = size();
  order_.assign(n, {});
  sorted_dist_.assign(n, {});
  wprefix_.assign(n, {});
  rank_.assign(n, std::vector<int>(n, 0));
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t c) {
    auto& ord = order_[c];
    ord.resize(n);
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](int a, int b) {
      if (dist_(c, a) != dist_(c, b)) return dist_(c, a) < dist_(c, b);
      return a < b;
    });
    auto& ds = sorted_dist_[c];
    auto& wp = wprefix_[c];
    ds.resize(n);
    wp.resize(n);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      ds[j] = dist_(c, ord[j]);
      acc += weights_(ord[j]);
      wp[j] = acc;
      rank_[c][ord[j]] = j;
    }
  });
}

double MetricMeasureSpace::volume(int center, double r) const {
  const auto& ds = sorted_dist_[center];
  const auto it = std::lower_bound(ds.begin(), ds.end(), r);
  const int cnt = static_cast<int>(it - ds.begin());
  return cnt == 0 ? 0.0 : wprefix_[center][cnt - 1];
}

std::vector<int> MetricMeasureSpace::ball_points(int center, double r) const {
  const auto& ds = sorted_dist_[center];
  const auto it = std::lower_bound(ds.begin(), ds.end(), r);
  const int cnt = static_cast<int>(it - ds.begin());
  return {order_[center].begin(), order_[center].begin() + cnt};
}

namespace {

MetricMeasureSpace finish_load(Eigen::MatrixXd dist, Eigen::VectorXd weights,
                               std::vector<std::string> ids, std::vector<Eigen::VectorXd> coords,
                               const LoadOptions& options) {
  if (options.snowflake_eps) {
    const double eps = *options.snowflake_eps;
    require(eps > 0.0 && eps <= 1.0, "snowflake exponent must lie in (0, 1]");
    for (Eigen::Index i = 0; i < dist.rows(); ++i)
      for (Eigen::Index j = 0; j < dist.cols(); ++j)
        dist(i, j) = i == j ? 0.0 : std::pow(dist(i, j), eps);
  }
  return MetricMeasureSpace(std::move(dist), std::move(weights), std::move(ids),
                            std::move(coords), options.threads);
}

MetricMeasureSpace load_coords(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), path + ": empty file");
  const auto header = split_csv_line(line);
  require(header.size() >= 3 && header.front() == "id" && header.back() == "weight",
          path + ": expected header id,x1,...,weight");
  const int dim = static_cast<int>(header.size()) - 2;
  std::vector<std::string> ids;
  std::vector<Eigen::VectorXd> coords;
  std::vector<double> weights;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tok = split_csv_line(line);
    require(static_cast<int>(tok.size()) == dim + 2,
            path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim + 2) +
                " fields, got " + std::to_string(tok.size()));
    ids.push_back(tok[0]);
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x(d) = parse_double(tok[d + 1], path, line_no);
    coords.push_back(std::move(x));
    weights.push_back(parse_double(tok.back(), path, line_no));
  }
  const int n = static_cast<int>(ids.size());
  require(n >= 1, path + ": no data rows");
  Eigen::MatrixXd dist(n, n);
  parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t i) {
    for (int j = 0; j < n; ++j) dist(i, j) = (coords[i] - coords[j]).norm();
  });
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(weights.data(), n);
  return finish_load(std::move(dist), std::move(w), std::move(ids), std::move(coords), options);
}

MetricMeasureSpace load_matrix(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(path + ": JSON parse error: " + e.what());
  }
  require(j.contains("weights") && j.contains("dist"),
          path + ": expected keys \"weights\" and \"dist\"");
  const auto& jw = j["weights"];
  const auto& jd = j["dist"];
  const int n = static_cast<int>(jw.size());
  require(n >= 1, path + ": empty weight list");
  require(static_cast<int>(jd.size()) == n, path + ": dist row count != weight count");
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = jw[i].get<double>();
  Eigen::MatrixXd dist(n, n);
  for (int i = 0; i < n; ++i) {
    require(static_cast<int>(jd[i].size()) == n, path + ": dist matrix is not square");
    for (int k = 0; k < n; ++k) dist(i, k) = jd[i][k].get<double>();
  }
  std::vector<std::string> ids;
  if (j.contains("ids")) {
    for (const auto& v : j["ids"]) ids.push_back(v.get<std::string>());
  }
  return finish_load(std::move(dist), std::move(w), std::move(ids), {}, options);
}

MetricMeasureSpace load_graph(const std::string& path, const LoadOptions& options) {
  require(!options.weights_path.empty(),
          "graph format needs options.weights_path (node-weight CSV)");
  // Node set and order come from the weight file.
  std::ifstream win(options.weights_path);
  require(win.good(), "cannot open " + options.weights_path);
  std::vector<std::string> ids;
  std::vector<double> weights;
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(win, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tok = split_csv_line(line);
    require(tok.size() == 2, options.weights_path + ":" + std::to_string(line_no) +
                                 ": expected id,weight");
    if (first && tok[0] == "id") {
      first = false;
      continue;
    }
    first = false;
    ids.push_back(tok[0]);
    weights.push_back(parse_double(tok[1], options.weights_path, line_no));
  }
  const int n = static_cast<int>(ids.size());
  require(n >= 1, options.weights_path + ": no nodes");
  std::vector<std::pair<std::string, int>> index;
  index.reserve(n);
  for (int i = 0; i < n; ++i) index.emplace_back(ids[i], i);
  std::sort(index.begin(), index.end());
  for (std::size_t i = 1; i < index.size(); ++i)
    require(index[i].first != index[i - 1].first,
            options.weights_path + ": duplicate node id " + index[i].first);
  auto lookup = [&](const std::string& id, int ln) {
    auto it = std::lower_bound(index.begin(), index.end(), std::make_pair(id, -1));
    require(it != index.end() && it->first == id,
            path + ":" + std::to_string(ln) + ": unknown node id " + id);
    return it->second;
  };

  std::ifstream ein(path);
  require(ein.good(), "cannot open " + path);
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  line_no = 0;
  first = true;
  while (std::getline(ein, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tok = split_csv_line(line);
    require(tok.size() == 3, path + ":" + std::to_string(line_no) + ": expected u,v,length");
    if (first && (tok[0] == "u" || tok[0] == "source")) {
      first = false;
      continue;
    }
    first = false;
    const int u = lookup(tok[0], line_no);
    const int v = lookup(tok[1], line_no);
    const double len = parse_double(tok[2], path, line_no);
    require(len > 0.0, path + ":" + std::to_string(line_no) + ": edge length must be positive");
    require(u != v, path + ":" + std::to_string(line_no) + ": self loop on node " + tok[0]);
    adj[u].emplace_back(v, len);
    adj[v].emplace_back(u, len);
  }

  Eigen::MatrixXd dist(n, n);
  const double inf = std::numeric_limits<double>::infinity();
  parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t src) {
    std::vector<double> d(n, inf);
    d[src] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    pq.emplace(0.0, static_cast<int>(src));
    while (!pq.empty()) {
      auto [dd, u] = pq.top();
      pq.pop();
      if (dd > d[u]) continue;
      for (auto [v, len] : adj[u]) {
        if (d[u] + len < d[v]) {
          d[v] = d[u] + len;
          pq.emplace(d[v], v);
        }
      }
    }
    for (int j = 0; j < n; ++j) dist(src, j) = d[j];
  });
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      require(std::isfinite(dist(i, j)),
              path + ": graph is not connected (" + ids[i] + " cannot reach " + ids[j] + ")");
  // Dijkstra from both endpoints may round differently; symmetrize exactly.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = std::min(dist(i, j), dist(j, i));
      dist(i, j) = dist(j, i) = d;
    }
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(weights.data(), n);
  return finish_load(std::move(dist), std::move(w), std::move(ids), {}, options);
}

}  // namespace

MetricMeasureSpace load_space(const std::string& path, SpaceFormat format,
                              const LoadOptions& options) {
  switch (format) {
    case SpaceFormat::coords:
      return load_coords(path, options);
    case SpaceFormat::matrix:
      return load_matrix(path, options);
    case SpaceFormat::graph:
      return load_graph(path, options);
  }
  throw Error("unknown space format");
}

namespace {

struct RadiusRange {
  double lo, hi;
};

RadiusRange profile_radius_range(const MetricMeasureSpace& space) {
  // Radii start at three median nearest-neighbor gaps so that atomic-scale
  // jumps (a ball that holds one point doubling onto three) do not dominate
  // the envelope, and end at the diameter.
  const int n = space.size();
  std::vector<double> nn(n, 0.0);
  for (int i = 0; i < n; ++i)
    nn[i] = n > 1 ? space.sorted_dist(i, 1) : 0.0;
  std::sort(nn.begin(), nn.end());
  const double med = nn[n / 2];
  const double lo = std::max(3.0 * med, 1e-12 * std::max(1.0, space.diameter()));
  const double hi = std::max(space.diameter(), lo * 1.0000001);
  return {lo, hi};
}

}  // namespace

SpaceProfile doubling_profile(const MetricMeasureSpace& space, int sample_count,
                              std::uint64_t seed) {
  SpaceProfile p;
  p.samples = sample_count;
  const int n = space.size();
  if (n < 2 || space.diameter() <= 0.0) {
    return p;  // single point: C_dbl = 1, all exponents 0
  }
  const auto range = profile_radius_range(space);
  p.r_lo = range.lo;
  p.r_hi = range.hi;
  Rng rng(seed);
  const double log_lo = std::log(range.lo), log_hi = std::log(range.hi);

  double c_dbl = 1.0;
  struct Triple {
    int x;
    double r, lambda, vr, vlr;
  };
  std::vector<Triple> triples;
  triples.reserve(sample_count);
  for (int s = 0; s < sample_count; ++s) {
    const int x = static_cast<int>(rng.below(n));
    const double r = std::exp(rng.uniform(log_lo, log_hi));
    const double lambda = std::exp(rng.uniform(0.0, std::log(8.0)));
    const double vr = space.volume(x, r);
    if (vr <= 0.0) continue;
    c_dbl = std::max(c_dbl, space.volume(x, 2.0 * r) / vr);
    triples.push_back({x, r, lambda, vr, space.volume(x, lambda * r)});
  }
  p.C_dbl = c_dbl;
  // n0_est: smallest exponent so that V(x, lr) <= C_dbl * l^n0 * V(x, r) on
  // every sampled triple; n is raised to cover both log2(C_dbl) and n0_est,
  // which makes the envelope exact on the sampled set and keeps n0_est <= n.
  double n0 = 0.0;
  for (const auto& t : triples) {
    if (t.lambda <= 1.0 + 1e-12 || t.vlr <= 0.0) continue;
    const double need = std::log(t.vlr / (c_dbl * t.vr)) / std::log(t.lambda);
    n0 = std::max(n0, need);
  }
  p.n0_est = n0;
  p.n = std::max(std::log2(std::max(c_dbl, 1.0)), n0);

  // Geometric doubling: greedy (r/2)-separated subsets of sampled balls.
  double n0_geo = 1.0;
  Rng grng = Rng::derived(seed, 0x9e0u);
  const int geo_samples = std::min(sample_count, 200);
  for (int s = 0; s < geo_samples; ++s) {
    const int x = static_cast<int>(grng.below(n));
    const double r = std::exp(grng.uniform(log_lo, log_hi));
    const auto pts = space.ball_points(x, r);
    std::vector<int> kept;
    for (int q : pts) {
      bool ok = true;
      for (int c : kept)
        if (space.dist(q, c) < r / 2.0) {
          ok = false;
          break;
        }
      if (ok) kept.push_back(q);
    }
    n0_geo = std::max(n0_geo, static_cast<double>(kept.size()));
  }
  p.N0_est = n0_geo;
  p.G0_est = std::log2(n0_geo);
  return p;
}

double doubling_envelope_recheck(const MetricMeasureSpace& space, const SpaceProfile& profile,
                                 int sample_count, std::uint64_t seed, double slack, bool* ok) {
  const int n = space.size();
  double worst = 0.0;
  bool pass = true;
  if (n < 2 || space.diameter() <= 0.0) {
    if (ok) *ok = true;
    return worst;
  }
  const auto range = profile_radius_range(space);
  Rng rng(seed);
  const double log_lo = std::log(range.lo), log_hi = std::log(range.hi);
  for (int s = 0; s < sample_count; ++s) {
    const int x = static_cast<int>(rng.below(n));
    const double r = std::exp(rng.uniform(log_lo, log_hi));
    const double lambda = std::exp(rng.uniform(0.0, std::log(8.0)));
    const double vr = space.volume(x, r);
    if (vr <= 0.0) continue;
    const double bound = slack * profile.C_dbl * std::pow(lambda, profile.n) * vr;
    const double val = space.volume(x, lambda * r);
    worst = std::max(worst, val / (profile.C_dbl * std::pow(lambda, profile.n) * vr));
    if (val > bound) pass = false;
  }
  if (ok) *ok = pass;
  return worst;
}

}  // namespace homwave
