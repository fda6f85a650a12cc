#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "homwave/common.hpp"

namespace homwave {

/// Finite metric measure space: a point cloud with a full distance matrix and
/// strictly positive point weights. Immutable after construction; all ball
/// queries use open balls (strict inequality d < r).
class MetricMeasureSpace {
 public:
  /// Builds from an explicit distance matrix. Validates symmetry, zero
  /// diagonal, strict positivity off the diagonal and the triangle
  /// inequality (exhaustive for <= 300 points, otherwise one million seeded
  /// random triples, tolerance 1e-9 relative to the diameter scale).
  MetricMeasureSpace(Eigen::MatrixXd dist, Eigen::VectorXd weights,
                     std::vector<std::string> ids = {},
                     std::vector<Eigen::VectorXd> coords = {}, int threads = 1);

  int size() const { return static_cast<int>(weights_.size()); }
  double dist(int i, int j) const { return dist_(i, j); }
  const Eigen::MatrixXd& dist_matrix() const { return dist_; }
  double weight(int i) const { return weights_(i); }
  const Eigen::VectorXd& weights() const { return weights_; }
  double total_mass() const { return total_mass_; }
  double diameter() const { return diameter_; }
  /// Smallest nonzero pairwise distance.
  double min_gap() const { return min_gap_; }
  const std::string& id(int i) const { return ids_[i]; }
  bool has_coords() const { return !coords_.empty(); }
  const Eigen::VectorXd& coord(int i) const { return coords_[i]; }

  /// Weighted mass of the open ball B(center, r).
  double volume(int center, double r) const;
  /// V(x, y) := mu(B(x, d(x, y))).
  double volume_to(int x, int y) const { return volume(x, dist_(x, y)); }

  /// Points of the open ball B(center, r) in (distance, id) order.
  std::vector<int> ball_points(int center, double r) const;
  /// Neighbors of `center` sorted by (distance, id).
  const std::vector<int>& neighbor_order(int center) const { return order_[center]; }
  /// Distance of the j-th sorted neighbor of `center`.
  double sorted_dist(int center, int j) const { return sorted_dist_[center][j]; }
  /// Cumulative weight of the first j+1 sorted neighbors of `center`.
  double weight_prefix(int center, int j) const { return wprefix_[center][j]; }
  /// Rank of point x in the sorted neighbor order of `center`.
  int rank_of(int center, int x) const { return rank_[center][x]; }

 private:
  void validate(int threads) const;
  void build_index(int threads);

  Eigen::MatrixXd dist_;
  Eigen::VectorXd weights_;
  std::vector<std::string> ids_;
  std::vector<Eigen::VectorXd> coords_;
  double total_mass_ = 0.0;
  double diameter_ = 0.0;
  double min_gap_ = 0.0;
  std::vector<std::vector<int>> order_;
  std::vector<std::vector<double>> sorted_dist_;
  std::vector<std::vector<double>> wprefix_;
  std::vector<std::vector<int>> rank_;
};

enum class SpaceFormat { coords, matrix, graph };

struct LoadOptions {
  /// Replaces the base metric d by d^eps (0 < eps <= 1).
  std::optional<double> snowflake_eps;
  /// Node-weight CSV, required for the graph format.
  std::string weights_path;
  int threads = 1;
};

/// Loads a space from disk.
///   coords: CSV with header id,x1,...,xD,weight; Euclidean metric.
///   matrix: JSON object {"weights": [...], "dist": [[...]]}.
///   graph:  CSV edge list u,v,length plus a node-weight CSV; metric is the
///           shortest-path distance, which must be finite (connected graph).
MetricMeasureSpace load_space(const std::string& path, SpaceFormat format,
                              const LoadOptions& options = {});

/// Empirical doubling statistics, all measured on seeded samples.
struct SpaceProfile {
  double C_dbl = 1.0;  ///< envelope constant for V(x,2r) <= C * V(x,r)
  double n = 0.0;      ///< exponent so V(x,lr) <= C_dbl * l^n * V(x,r) on samples
  double n0_est = 0.0; ///< infimal exponent compatible with C_dbl on samples
  double N0_est = 1.0; ///< max size of an (r/2)-separated subset of a sampled ball
  double G0_est = 0.0; ///< log2(N0_est)
  int samples = 0;
  double r_lo = 0.0, r_hi = 0.0;  ///< sampled radius range
};

/// Samples (x, r) pairs with r log-uniform between three median nearest
/// neighbor gaps and the diameter, plus lambda factors in [1, 8], and returns
/// the empirical envelope. By construction every sampled triple satisfies
/// V(x, lambda r) <= C_dbl * lambda^n * V(x, r) exactly, and n0_est <= n.
SpaceProfile doubling_profile(const MetricMeasureSpace& space, int sample_count,
                              std::uint64_t seed);

/// Re-samples with a fresh seed and checks the profile envelope with the
/// given slack factor. Returns the worst fresh ratio observed.
double doubling_envelope_recheck(const MetricMeasureSpace& space,
                                 const SpaceProfile& profile, int sample_count,
                                 std::uint64_t seed, double slack, bool* ok);

}  // namespace homwave
