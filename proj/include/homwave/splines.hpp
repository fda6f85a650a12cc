#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "homwave/lattice.hpp"

namespace homwave {

/// Monte Carlo spline system: s^k_a(x) is the fraction of random dyadic draws
/// whose level-k cube at a contains x. One draw governs the whole hierarchy,
/// so the per-draw refinement identity holds exactly and the averaged one
/// holds up to Monte Carlo noise.
struct SplineSystem {
  const NetHierarchy* nets = nullptr;
  int samples = 0;
  std::uint64_t seed = 0;

  /// Per level: |net| x n matrix, rows in net (ascending index) order.
  std::vector<Eigen::MatrixXd> values;
  std::vector<Eigen::VectorXd> mu;  ///< mu^k_a = V(x_a, delta^k)
  std::vector<Eigen::VectorXd> nu;  ///< nu^k_a = integral of s^k_a
  /// Per transition k -> k+1: p(a, b) = s^k_a(x^{k+1}_b).
  std::vector<Eigen::MatrixXd> p_coeffs;
  std::vector<double> refinement_residual;  ///< sup norm, per transition
  std::vector<char> interpolation_exact;    ///< per level
  std::vector<char> refinement_degraded;    ///< least-squares fallback used
  std::vector<double> eta_est;              ///< per level, NaN when not fit

  double value(int k, int alpha, int x) const {
    return values[nets->level_index(k)](nets->row_of(k, alpha), x);
  }
};

/// Runs `samples` random dyadic draws (substream seeds: seed XOR draw index)
/// and averages indicator memberships. Counts accumulate as integers, so the
/// result is bit-identical for any thread count, and with a power-of-two
/// sample count the partition of unity is exact in floating point.
SplineSystem estimate_splines(const NetHierarchy& nets, int samples, std::uint64_t seed,
                              int threads = 1);

struct RefinementCoefficients {
  Eigen::MatrixXd p;       ///< |net_k| x |net_{k+1}|
  double residual = 0.0;   ///< sup |s^k_a - sum_b p(a,b) s^{k+1}_b|
  bool degraded = false;   ///< interpolation failed, least-squares fit used
};

/// Reads p(a, b) = s^k_a(x^{k+1}_b) off the spline table; if level-(k+1)
/// interpolation is broken the coefficients fall back to a weighted
/// least-squares fit and the result is flagged.
RefinementCoefficients refinement_coefficients(const SplineSystem& splines, int k);

struct SupportReport {
  double r_in = 0.0;   ///< min over (k,a): s = 1 on B(x_a, r_in delta^k)
  double r_out = 0.0;  ///< max over (k,a): s = 0 outside B(x_a, r_out delta^k)
  std::vector<double> r_in_level;
  std::vector<double> r_out_level;
};

SupportReport spline_support(const SplineSystem& splines);

struct RegularityLevel {
  int k = 0;
  double eta_est = 0.0;  ///< log-log slope of |ds| against d/delta^k
  double C_est = 0.0;    ///< envelope constant on the sampled pairs
  long usable_pairs = 0;
  bool indicator_like = false;  ///< all values in {0,1}; no regularity to fit
  /// delta^k covers at least four gaps; below that the cloud has no scales
  /// left to fit and the slope estimate is noise.
  bool resolved = false;
};

struct RegularityReport {
  std::vector<RegularityLevel> levels;
};

/// Least-squares Hoelder fit per level over deterministically subsampled
/// pairs with 0 < |ds| and d <= delta^k.
RegularityReport verify_spline_regularity(const SplineSystem& splines,
                                          long pair_budget_per_level = 200000);

struct RieszBandLevel {
  int k = 0;
  double r_min = 0.0, r_max = 0.0;
};

/// Ratio ||sum_a lambda_a s^k_a||_{L2} / (sum_a lambda_a^2 nu^k_a)^{1/2} over
/// seeded Gaussian coefficient vectors; reported band per level.
std::vector<RieszBandLevel> riesz_band(const SplineSystem& splines, int trials,
                                       std::uint64_t seed);

}  // namespace homwave
