#include "homwave/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "homwave/rng.hpp"

namespace homwave {

NetHierarchy::NetHierarchy(const MetricMeasureSpace& space, double delta, int k_min, int k_max,
                           std::vector<std::vector<int>> nets)
    : space_(&space), delta_(delta), k_min_(k_min), k_max_(k_max), nets_(std::move(nets)) {
  require(delta_ > 0.0 && delta_ <= 0.5, "delta must lie in (0, 1/2]");
  require(k_min_ <= k_max_, "k_min must not exceed k_max");
  require(static_cast<int>(nets_.size()) == level_count(), "level count mismatch");
  const int n = space_->size();
  row_of_.assign(nets_.size(), std::vector<int>(n, -1));
  for (std::size_t l = 0; l < nets_.size(); ++l) {
    require(!nets_[l].empty(), "empty net at level " + std::to_string(k_min_ + (int)l));
    for (std::size_t r = 0; r < nets_[l].size(); ++r) {
      const int p = nets_[l][r];
      require(p >= 0 && p < n, "net point out of range");
      require(row_of_[l][p] == -1, "duplicate net point");
      row_of_[l][p] = static_cast<int>(r);
    }
    require(std::is_sorted(nets_[l].begin(), nets_[l].end()), "net not in index order");
  }
  // Nesting, separation and covering are construction invariants; verify.
  for (int k = k_min_; k < k_max_; ++k) {
    for (int p : net(k))
      require(in_net(k + 1, p), "net nesting violated at level " + std::to_string(k));
  }
  for (int k = k_min_; k <= k_max_; ++k) {
    const double sep = scale(k);
    const auto& pts = net(k);
    for (std::size_t a = 0; a < pts.size(); ++a)
      for (std::size_t b = a + 1; b < pts.size(); ++b)
        require(space_->dist(pts[a], pts[b]) >= sep,
                "net separation violated at level " + std::to_string(k));
    for (int x = 0; x < n; ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (int p : pts) best = std::min(best, space_->dist(x, p));
      require(best < 2.0 * sep, "net covering violated at level " + std::to_string(k));
    }
  }
}

std::vector<int> NetHierarchy::new_points(int k) const {
  std::vector<int> out;
  for (int p : net(k + 1))
    if (!in_net(k, p)) out.push_back(p);
  return out;
}

NetHierarchy::Candidates NetHierarchy::parent_candidates(int k, int beta) const {
  Candidates c;
  const double sep = scale(k);
  const auto& ord = space_->neighbor_order(beta);
  for (std::size_t j = 0; j < ord.size(); ++j) {
    const double d = space_->sorted_dist(beta, static_cast<int>(j));
    if (d >= 2.0 * sep) break;
    if (in_net(k, ord[j])) {
      if (c.eligible.empty() && d < sep / 3.0) c.forced = ord[j];
      c.eligible.push_back(ord[j]);
    }
  }
  return c;
}

NetHierarchy build_nets(const MetricMeasureSpace& space, double delta,
                        std::optional<int> k_min_opt, std::optional<int> k_max_opt) {
  require(delta > 0.0 && delta <= 0.5, "delta must lie in (0, 1/2]");
  if (k_min_opt && k_max_opt)
    require(*k_min_opt <= *k_max_opt, "k_min must not exceed k_max");
  const int n = space.size();
  const double diam = space.diameter();
  const double gap = space.min_gap();

  int k_min, k_max;
  if (k_min_opt) {
    k_min = *k_min_opt;
  } else if (diam <= 0.0) {
    k_min = 0;
  } else {
    // Coarsest level whose separation scale does not exceed twice the
    // diameter; anything coarser would be a single point anyway.
    k_min = static_cast<int>(std::ceil(std::log(2.0 * diam) / std::log(delta)));
    while (std::pow(delta, k_min) > 2.0 * diam) ++k_min;
  }
  if (k_max_opt) {
    k_max = *k_max_opt;
  } else if (gap <= 0.0) {
    k_max = k_min;
  } else {
    // Finest level whose scale drops below the smallest gap, so the maximal
    // net there is the entire cloud.
    k_max = static_cast<int>(std::ceil(std::log(gap) / std::log(delta)));
    while (std::pow(delta, k_max) > gap) ++k_max;
  }
  if (k_max < k_min) k_max = k_min;

  // Selection order: descending weight, ties by smallest index.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (space.weight(a) != space.weight(b)) return space.weight(a) > space.weight(b);
    return a < b;
  });

  const int levels = k_max - k_min + 1;
  const int anchor = std::clamp(0, k_min, k_max);
  std::vector<std::vector<int>> nets(levels);

  auto greedy = [&](int k, const std::vector<int>& seed_points, const std::vector<int>& pool) {
    const double sep = std::pow(delta, k);
    std::vector<int> chosen = seed_points;
    std::vector<char> picked(n, 0);
    for (int p : chosen) picked[p] = 1;
    for (int p : pool) {
      if (picked[p]) continue;
      bool ok = true;
      for (int q : chosen)
        if (space.dist(p, q) < sep) {
          ok = false;
          break;
        }
      if (ok) {
        chosen.push_back(p);
        picked[p] = 1;
      }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  };

  nets[anchor - k_min] = greedy(anchor, {}, order);
  for (int k = anchor + 1; k <= k_max; ++k)
    nets[k - k_min] = greedy(k, nets[k - 1 - k_min], order);
  for (int k = anchor - 1; k >= k_min; --k) {
    // Maximal separated subset of the next finer net, same selection order.
    std::vector<int> pool;
    for (int p : order)
      if (std::binary_search(nets[k + 1 - k_min].begin(), nets[k + 1 - k_min].end(), p))
        pool.push_back(p);
    nets[k - k_min] = greedy(k, {}, pool);
  }
  return NetHierarchy(space, delta, k_min, k_max, std::move(nets));
}

namespace {

std::vector<std::vector<int>> draw_parents(const NetHierarchy& nets, ParentMode mode, Rng* rng) {
  const int n = nets.space().size();
  std::vector<std::vector<int>> parent(std::max(0, nets.level_count() - 1),
                                       std::vector<int>(n, -1));
  for (int k = nets.k_min(); k < nets.k_max(); ++k) {
    const int t = nets.level_index(k);
    for (int beta : nets.net(k + 1)) {
      if (nets.in_net(k, beta)) {
        parent[t][beta] = beta;  // persisting point stays its own parent
        continue;
      }
      const auto cand = nets.parent_candidates(k, beta);
      require(!cand.eligible.empty(), "no eligible parent within 2 delta^k");
      if (mode == ParentMode::nearest) {
        parent[t][beta] = cand.eligible.front();
      } else if (cand.forced >= 0) {
        parent[t][beta] = cand.forced;
      } else {
        parent[t][beta] = cand.eligible[rng->below(cand.eligible.size())];
      }
    }
  }
  return parent;
}

ParentMap finish_parents(const NetHierarchy& nets, std::vector<std::vector<int>> parent,
                         ParentMode mode, std::uint64_t seed) {
  ParentMap pm;
  pm.mode = mode;
  pm.seed = seed;
  pm.parent = std::move(parent);
  const int n = nets.space().size();
  pm.children.assign(pm.parent.size(), std::vector<std::vector<int>>(n));
  for (std::size_t t = 0; t < pm.parent.size(); ++t) {
    const int k = nets.k_min() + static_cast<int>(t);
    for (int beta : nets.net(k + 1)) {
      const int p = pm.parent[t][beta];
      require(p >= 0 && nets.in_net(k, p), "parent map entry is not a level-k net point");
      pm.children[t][p].push_back(beta);
    }
  }
  return pm;
}

/// Finest-level owner of every point. Deterministic mode picks the nearest
/// finest net point (ties by index); random mode draws uniformly among net
/// points within 2 delta^K unless one sits within delta^K/3 and claims x.
std::vector<int> draw_finest(const NetHierarchy& nets, bool random, Rng* rng) {
  const auto& space = nets.space();
  const int n = space.size();
  const int K = nets.k_max();
  const double sep = nets.scale(K);
  std::vector<int> owner(n, -1);
  for (int x = 0; x < n; ++x) {
    const auto& ord = space.neighbor_order(x);
    if (!random) {
      for (std::size_t j = 0; j < ord.size(); ++j)
        if (nets.in_net(K, ord[j])) {
          owner[x] = ord[j];
          break;
        }
    } else {
      std::vector<int> eligible;
      for (std::size_t j = 0; j < ord.size(); ++j) {
        const double d = space.sorted_dist(x, static_cast<int>(j));
        if (d >= 2.0 * sep) break;
        if (nets.in_net(K, ord[j])) {
          if (eligible.empty() && d < sep / 3.0) {
            owner[x] = ord[j];
            break;
          }
          eligible.push_back(ord[j]);
        }
      }
      if (owner[x] < 0) {
        require(!eligible.empty(), "no finest net point within 2 delta^K");
        owner[x] = eligible[rng->below(eligible.size())];
      }
    }
    require(owner[x] >= 0, "finest-level assignment failed");
  }
  return owner;
}

std::vector<std::vector<int>> chain_assignments(const NetHierarchy& nets,
                                                const std::vector<std::vector<int>>& parent,
                                                std::vector<int> finest) {
  const int n = nets.space().size();
  const int levels = nets.level_count();
  std::vector<std::vector<int>> cube_of(levels);
  cube_of[levels - 1] = std::move(finest);
  for (int l = levels - 2; l >= 0; --l) {
    cube_of[l].resize(n);
    for (int x = 0; x < n; ++x) cube_of[l][x] = parent[l][cube_of[l + 1][x]];
  }
  return cube_of;
}

}  // namespace

ParentMap assign_parents(const NetHierarchy& nets, ParentMode mode, std::uint64_t seed) {
  Rng rng(seed);
  return finish_parents(nets, draw_parents(nets, mode, &rng), mode, seed);
}

DyadicSystem::DyadicSystem(const NetHierarchy& nets, ParentMap parents,
                           std::vector<std::vector<int>> cube_of)
    : nets_(&nets), parents_(std::move(parents)), cube_of_(std::move(cube_of)) {
  const int n = nets_->space().size();
  const int levels = nets_->level_count();
  require(static_cast<int>(cube_of_.size()) == levels, "cube assignment level mismatch");
  require(static_cast<int>(parents_.parent.size()) == std::max(0, levels - 1),
          "parent map level mismatch");
  for (int l = 0; l < levels; ++l) {
    require(static_cast<int>(cube_of_[l].size()) == n, "cube assignment size mismatch");
    const int k = nets_->k_min() + l;
    for (int x = 0; x < n; ++x)
      require(nets_->in_net(k, cube_of_[l][x]), "cube owner is not a net point");
  }
  for (int l = 0; l + 1 < levels; ++l)
    for (int x = 0; x < n; ++x)
      require(cube_of_[l][x] == parents_.parent[l][cube_of_[l + 1][x]],
              "cube assignments do not follow the parent map");
  members_.assign(levels, std::vector<std::vector<int>>(n));
  mass_.assign(levels, std::vector<double>(n, 0.0));
  for (int l = 0; l < levels; ++l) {
    for (int x = 0; x < n; ++x) members_[l][cube_of_[l][x]].push_back(x);
    for (int a = 0; a < n; ++a) {
      double m = 0.0;
      for (int x : members_[l][a]) m += nets_->space().weight(x);
      mass_[l][a] = m;
    }
  }
}

int DyadicSystem::ancestor(int k_from, int alpha, int k_to) const {
  int a = alpha;
  for (int k = k_from - 1; k >= k_to; --k) a = parents_.parent[nets_->level_index(k)][a];
  return a;
}

DyadicSystem build_cubes(const NetHierarchy& nets, ParentMap parents) {
  auto cube_of = chain_assignments(nets, parents.parent, draw_finest(nets, false, nullptr));
  return DyadicSystem(nets, std::move(parents), std::move(cube_of));
}

DyadicSystem sample_random_system(const NetHierarchy& nets, std::uint64_t seed) {
  Rng rng(seed);
  auto parent = draw_parents(nets, ParentMode::random, &rng);
  auto finest = draw_finest(nets, true, &rng);
  auto cube_of = chain_assignments(nets, parent, std::move(finest));
  return DyadicSystem(nets, finish_parents(nets, std::move(parent), ParentMode::random, seed),
                      std::move(cube_of));
}

CubeAxiomReport verify_cube_axioms(const DyadicSystem& cubes) {
  CubeAxiomReport rep;
  const auto& nets = cubes.nets();
  const auto& space = nets.space();
  const int n = space.size();

  rep.net_points_own_cube_ok = true;
  for (int k = nets.k_min(); k <= nets.k_max(); ++k)
    for (int a : nets.net(k))
      if (cubes.cube_of(k, a) != a) rep.net_points_own_cube_ok = false;

  rep.partition_ok = true;
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    double mass = 0.0;
    for (int a : nets.net(k)) {
      if (cubes.members(k, a).empty()) rep.partition_ok = false;
      mass += cubes.cube_mass(k, a);
    }
    if (std::abs(mass - space.total_mass()) > 1e-12 * std::max(1.0, space.total_mass()))
      rep.partition_ok = false;
  }

  rep.nesting_ok = true;
  for (int k = nets.k_min(); k < nets.k_max(); ++k)
    for (int x = 0; x < n; ++x)
      if (cubes.cube_of(k, x) != cubes.parent_of(k, cubes.cube_of(k + 1, x)))
        rep.nesting_ok = false;

  rep.parent_proximity_ok = true;
  rep.max_children = 0;
  for (int k = nets.k_min(); k < nets.k_max(); ++k) {
    const int t = nets.level_index(k);
    for (int beta : nets.net(k + 1))
      if (space.dist(beta, cubes.parents().parent[t][beta]) >= 2.0 * nets.scale(k))
        rep.parent_proximity_ok = false;
    for (int a : nets.net(k))
      rep.max_children =
          std::max(rep.max_children, static_cast<int>(cubes.parents().child_list(t, a).size()));
  }

  rep.ball_containment_ok = true;
  for (int l = nets.k_min(); l <= nets.k_max(); ++l) {
    for (int beta : nets.net(l)) {
      const auto ball = space.ball_points(beta, 4.0 * nets.scale(l));
      for (int k = l - 1; k >= nets.k_min(); --k) {
        const int alpha = cubes.ancestor(l, beta, k);
        const double limit = 4.0 * nets.scale(k);
        for (int x : ball)
          if (space.dist(x, alpha) >= limit) rep.ball_containment_ok = false;
      }
    }
  }

  double inner = std::numeric_limits<double>::infinity();
  double outer = 0.0;
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    const double sc = nets.scale(k);
    for (int a : nets.net(k)) {
      for (int x : cubes.members(k, a)) outer = std::max(outer, space.dist(a, x) / sc);
      // First point in (distance, index) order owned by another cube bounds
      // the radius of the largest ball safely inside this cube.
      const auto& ord = space.neighbor_order(a);
      for (int j = 0; j < n; ++j) {
        if (cubes.cube_of(k, ord[j]) != a) {
          inner = std::min(inner, space.sorted_dist(a, j) / sc);
          break;
        }
      }
    }
  }
  if (!std::isfinite(inner)) inner = 4.0;  // every cube is the whole cloud
  rep.inner_ratio = inner;
  rep.outer_ratio = outer;
  rep.sandwich_ok = inner >= 1.0 / 3.0 && outer < 4.0;
  return rep;
}

SeparatedSumReport separated_sum_check(const NetHierarchy& nets, int k, double eps) {
  require(eps > 0.0, "eps must be positive");
  const auto& space = nets.space();
  const double sc = nets.scale(k);
  SeparatedSumReport rep;
  for (int a = 0; a < space.size(); ++a) {
    double nearest = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (int b : nets.net(k)) {
      const double d = space.dist(a, b) / sc;
      nearest = std::min(nearest, d);
      sum += std::exp(-eps * d);
    }
    const double val = std::exp(eps * nearest / 2.0) * sum;
    if (val > rep.sup) {
      rep.sup = val;
      rep.arg_point = a;
    }
  }
  return rep;
}

std::string cubes_to_json(const DyadicSystem& cubes) {
  const auto& nets = cubes.nets();
  nlohmann::json j;
  j["delta"] = nets.delta();
  j["k_min"] = nets.k_min();
  j["k_max"] = nets.k_max();
  j["levels"] = nlohmann::json::array();
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    nlohmann::json lvl;
    lvl["k"] = k;
    lvl["alphas"] = nets.net(k);
    std::vector<int> assign(nets.space().size());
    for (int x = 0; x < nets.space().size(); ++x) assign[x] = cubes.cube_of(k, x);
    lvl["cube_of"] = assign;
    std::vector<int> par;
    if (k > nets.k_min())
      for (int a : nets.net(k)) par.push_back(cubes.parent_of(k - 1, a));
    lvl["parent"] = par;
    j["levels"].push_back(lvl);
  }
  return j.dump(2);
}

DyadicSystem cubes_from_json(const NetHierarchy& nets, const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("cube system JSON parse error: ") + e.what());
  }
  require(j["k_min"].get<int>() == nets.k_min() && j["k_max"].get<int>() == nets.k_max(),
          "cube system level range does not match the net hierarchy");
  require(std::abs(j["delta"].get<double>() - nets.delta()) == 0.0,
          "cube system delta does not match the net hierarchy");
  const int n = nets.space().size();
  const int levels = nets.level_count();
  std::vector<std::vector<int>> cube_of(levels, std::vector<int>(n));
  std::vector<std::vector<int>> parent(std::max(0, levels - 1), std::vector<int>(n, -1));
  require(static_cast<int>(j["levels"].size()) == levels, "cube system level count mismatch");
  for (int l = 0; l < levels; ++l) {
    const auto& lvl = j["levels"][l];
    const int k = nets.k_min() + l;
    require(lvl["k"].get<int>() == k, "cube system levels out of order");
    const auto alphas = lvl["alphas"].get<std::vector<int>>();
    require(alphas == nets.net(k), "cube system net mismatch at level " + std::to_string(k));
    const auto assign = lvl["cube_of"].get<std::vector<int>>();
    require(static_cast<int>(assign.size()) == n, "cube_of size mismatch");
    cube_of[l] = assign;
    if (l > 0) {
      const auto par = lvl["parent"].get<std::vector<int>>();
      require(par.size() == alphas.size(), "parent array size mismatch");
      for (std::size_t r = 0; r < alphas.size(); ++r) parent[l - 1][alphas[r]] = par[r];
    }
  }
  ParentMap pm = finish_parents(nets, std::move(parent), ParentMode::nearest, 0);
  return DyadicSystem(nets, std::move(pm), std::move(cube_of));
}

}  // namespace homwave
