#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "homwave/space.hpp"

namespace homwave {

/// Nested family of maximal separated nets. Level k uses scale delta^k;
/// larger k means finer. Net members are point indices, and the sets are
/// nested: every level-k net point also belongs to every finer net.
class NetHierarchy {
 public:
  NetHierarchy(const MetricMeasureSpace& space, double delta, int k_min, int k_max,
               std::vector<std::vector<int>> nets);

  const MetricMeasureSpace& space() const { return *space_; }
  double delta() const { return delta_; }
  int k_min() const { return k_min_; }
  int k_max() const { return k_max_; }
  int level_count() const { return k_max_ - k_min_ + 1; }
  double scale(int k) const { return std::pow(delta_, k); }
  int level_index(int k) const { return k - k_min_; }

  /// Net members at level k, ascending point index.
  const std::vector<int>& net(int k) const { return nets_[level_index(k)]; }
  bool in_net(int k, int point) const { return row_of_[level_index(k)][point] >= 0; }
  /// Row of a net point within the level-k net ordering, or -1.
  int row_of(int k, int point) const { return row_of_[level_index(k)][point]; }

  /// Points added between level k and k+1 (ascending index).
  std::vector<int> new_points(int k) const;

  /// Parent candidates of a level-(k+1) net point within 2 delta^k, sorted by
  /// (distance, index); `forced` is set when the closest candidate lies
  /// within delta^k / 3 (it is then unique by separation).
  struct Candidates {
    std::vector<int> eligible;
    int forced = -1;
  };
  Candidates parent_candidates(int k, int beta) const;

 private:
  const MetricMeasureSpace* space_;
  double delta_;
  int k_min_, k_max_;
  std::vector<std::vector<int>> nets_;
  std::vector<std::vector<int>> row_of_;
};

/// Greedy construction. The anchor level is k = 0 clamped into [k_min,
/// k_max]: there the net is grown over the whole cloud in descending-weight
/// order (ties by index); finer levels extend the previous net the same way;
/// coarser levels are maximal subsets of the next finer net. Pass nullopt
/// bounds to derive them from the diameter and the smallest gap; the derived
/// finest net always contains every cloud point.
NetHierarchy build_nets(const MetricMeasureSpace& space, double delta,
                        std::optional<int> k_min = std::nullopt,
                        std::optional<int> k_max = std::nullopt);

enum class ParentMode { nearest, random };

/// parent[t][beta] = parent net point of beta in the transition from level
/// k_min + t + 1 down to k_min + t; children lists are the inverse map.
struct ParentMap {
  std::vector<std::vector<int>> parent;    // per transition, indexed by point id (-1 off-net)
  std::vector<std::vector<std::vector<int>>> children;  // per transition, by point id
  ParentMode mode = ParentMode::nearest;
  std::uint64_t seed = 0;

  const std::vector<int>& child_list(int t, int alpha) const { return children[t][alpha]; }
};

/// Assigns every level-(k+1) net point a parent at level k within 2 delta^k.
/// A persisting point is its own parent. nearest: closest candidate, ties by
/// smallest index. random: any candidate within delta^k/3 is forced (its own
/// distance-zero case covers persistence); otherwise uniform among eligible.
ParentMap assign_parents(const NetHierarchy& nets, ParentMode mode, std::uint64_t seed = 0);

/// Dyadic cube system: one cube per net point per level, each point assigned
/// to exactly one cube per level, cubes nested along the parent map.
class DyadicSystem {
 public:
  DyadicSystem(const NetHierarchy& nets, ParentMap parents,
               std::vector<std::vector<int>> cube_of);

  const NetHierarchy& nets() const { return *nets_; }
  const MetricMeasureSpace& space() const { return nets_->space(); }
  const ParentMap& parents() const { return parents_; }

  /// Net point owning x at level k.
  int cube_of(int k, int x) const { return cube_of_[nets_->level_index(k)][x]; }
  /// Members of cube (k, alpha), ascending point index.
  const std::vector<int>& members(int k, int alpha) const {
    return members_[nets_->level_index(k)][alpha];
  }
  double cube_mass(int k, int alpha) const { return mass_[nets_->level_index(k)][alpha]; }
  /// Parent net point of (k+1, beta) at level k.
  int parent_of(int k, int beta) const {
    return parents_.parent[nets_->level_index(k)][beta];
  }
  /// Ancestor of (k_from, alpha) at the coarser level k_to.
  int ancestor(int k_from, int alpha, int k_to) const;

 private:
  const NetHierarchy* nets_;
  ParentMap parents_;
  std::vector<std::vector<int>> cube_of_;
  std::vector<std::vector<std::vector<int>>> members_;
  std::vector<std::vector<double>> mass_;
};

/// Deterministic system: nearest finest net point (ties by index), cubes at
/// coarser levels are unions of children along the given parent map.
DyadicSystem build_cubes(const NetHierarchy& nets, ParentMap parents);

/// One random draw: random parents (seed) and randomized finest-level
/// assignment among net points within 2 delta^K, with the forced-closest
/// rule: any net point within delta^K/3 of x claims x outright.
DyadicSystem sample_random_system(const NetHierarchy& nets, std::uint64_t seed);

struct CubeAxiomReport {
  bool nesting_ok = false;           ///< coarser cubes are disjoint unions of finer ones
  bool partition_ok = false;         ///< every level tiles the cloud, masses add up
  bool ball_containment_ok = false;  ///< contained cubes have contained 4 delta^k balls
  bool parent_proximity_ok = false;  ///< d(child center, parent center) < 2 delta^k
  bool net_points_own_cube_ok = false;
  double inner_ratio = 0.0;   ///< min over cubes of (largest safe ball radius)/delta^k
  double outer_ratio = 0.0;   ///< max over cubes of (farthest member distance)/delta^k
  int max_children = 0;
  bool sandwich_ok = false;   ///< inner_ratio >= 1/3 and outer_ratio < 4
  bool ok(bool strict) const {
    const bool base = nesting_ok && partition_ok && ball_containment_ok &&
                      parent_proximity_ok && net_points_own_cube_ok;
    return strict ? base && sandwich_ok : base;
  }
};

CubeAxiomReport verify_cube_axioms(const DyadicSystem& cubes);

struct SeparatedSumReport {
  double sup = 0.0;
  int arg_point = -1;
};

/// sup over cloud points a of exp(eps d(a,Net)/2) * sum_b exp(-eps d(a,b)),
/// with distances rescaled by delta^k so the level-k net is 1-separated.
SeparatedSumReport separated_sum_check(const NetHierarchy& nets, int k, double eps);

/// JSON round trip for a cube system (schema: delta plus one entry per level
/// with k, alphas, cube_of, parent).
std::string cubes_to_json(const DyadicSystem& cubes);
DyadicSystem cubes_from_json(const NetHierarchy& nets, const std::string& text);

}  // namespace homwave
