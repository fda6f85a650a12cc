#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "homwave/splines.hpp"

namespace homwave {

enum class InvSqrtMethod { eig, neumann };

/// Inverse square root of a symmetric positive definite matrix.
///   eig:     spectral decomposition.
///   neumann: series (2||M||)^{-1/2} sum_n p_n A^n with A = Id - M/(2||M||),
///            truncated once the added term drops below tol/10 in max norm.
/// Both return S with ||S M S - Id||_max <= tol or throw.
Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& m, InvSqrtMethod method, double tol = 1e-10,
                         int max_terms = 100000);

/// Coefficients p_0, ..., p_{count-1} of the binomial series (1-t)^{-1/2}.
std::vector<double> neumann_coefficients(int count);

/// Refinement-consistent spline ladder: the finest level is taken verbatim
/// and coarser levels are rebuilt as p-combinations of the next finer level.
/// This makes the nesting V_k inside V_{k+1} exact, which the raw Monte Carlo
/// averages satisfy only up to sampling noise; the gap is reported.
struct MraLadder {
  std::vector<Eigen::MatrixXd> values;
  std::vector<double> gap;  ///< per level, max |raw - ladder|
};

MraLadder build_ladder(const SplineSystem& splines);

/// Gram data for one level: M is the normalized spline Gram, Mtilde the Gram
/// of the projected new-point family governing the wavelet construction at
/// the transition k -> k+1 (empty when there is no transition or no new
/// points). projection_discrepancy records how far the projected Gram sits
/// from the plain restriction of the level-(k+1) Gram to the new-point block.
struct GramData {
  int k = 0;
  Eigen::MatrixXd M;
  Eigen::MatrixXd Mtilde;
  double m_min_eig = 0.0, m_max_eig = 0.0;
  double mt_min_eig = 0.0, mt_max_eig = 0.0;
  double mt_norm = 0.0;
  double projection_discrepancy = 0.0;
  bool ill_conditioned = false;  ///< min eig < 1e-10 * max eig somewhere
};

GramData gram(const SplineSystem& splines, int k);

struct CoefficientField {
  Eigen::VectorXd wavelet;  ///< aligned with WaveletBasis::items
  Eigen::VectorXd coarse;   ///< aligned with the coarse scaling functions
};

/// Orthonormal wavelet basis. Each wavelet is indexed by (k, alpha, beta):
/// scale delta^k, parent cube (k, alpha), center beta = x^{k+1}_beta a net
/// point new at level k+1. Together with the coarse scaling functions the
/// system is a complete orthonormal basis of functions on the cloud.
class WaveletBasis {
 public:
  struct Item {
    int k, alpha, beta;
  };

  const DyadicSystem& cubes() const { return *cubes_; }
  const SplineSystem& splines() const { return *splines_; }
  const MetricMeasureSpace& space() const { return cubes_->space(); }

  const std::vector<Item>& items() const { return items_; }
  int size() const { return static_cast<int>(items_.size()); }
  const Eigen::MatrixXd& wavelet_values() const { return wavelets_; }
  const Eigen::MatrixXd& coarse_values() const { return coarse_; }
  const std::vector<int>& coarse_alphas() const { return coarse_alphas_; }

  double eps0() const { return eps0_; }
  double c_lower() const { return c_lower_; }
  double c3_min() const { return c3_min_; }
  double min_core_ratio() const { return min_core_ratio_; }

  double cube_mass(int item) const { return cube_mass_[item]; }
  /// Points of the core ball W = B(beta, eps0 delta^k).
  const std::vector<int>& core(int item) const { return core_[item]; }
  double core_mass(int item) const { return core_mass_[item]; }

  const std::vector<GramData>& gram_info() const { return gram_info_; }
  const std::vector<double>& ladder_gap() const { return ladder_gap_; }

  /// Levels whose projected Gram was too ill-conditioned to orthonormalize;
  /// their wavelets are missing and the basis is flagged.
  const std::vector<int>& excluded_levels() const { return excluded_levels_; }
  bool flagged() const { return !excluded_levels_.empty(); }

  friend WaveletBasis build_wavelets(const SplineSystem& splines, const DyadicSystem& cubes,
                                     double tol);

 private:
  const DyadicSystem* cubes_ = nullptr;
  const SplineSystem* splines_ = nullptr;
  std::vector<Item> items_;
  Eigen::MatrixXd wavelets_;
  Eigen::MatrixXd coarse_;
  std::vector<int> coarse_alphas_;
  double eps0_ = 0.0, c_lower_ = 0.0, c3_min_ = 0.0, min_core_ratio_ = 0.0;
  std::vector<double> cube_mass_, core_mass_;
  std::vector<std::vector<int>> core_;
  std::vector<GramData> gram_info_;
  std::vector<double> ladder_gap_;
  std::vector<int> excluded_levels_;
};

/// Projects the normalized new-point splines off the coarser space, then
/// orthonormalizes through the inverse square root of the projected Gram.
/// Requires the finest net to contain every cloud point, which makes the
/// combined system square: (number of wavelets) + (coarse dim) = cloud size.
/// Signs are normalized so each function's first significant entry is
/// positive; the core radius eps0 is attached by the lower-bound search.
WaveletBasis build_wavelets(const SplineSystem& splines, const DyadicSystem& cubes,
                            double tol = 1e-10);

CoefficientField analyze(const WaveletBasis& basis, const Eigen::VectorXd& f);
Eigen::VectorXd synthesize(const WaveletBasis& basis, const CoefficientField& coeffs);

struct ExactnessReport {
  double orthonormality_dev = 0.0;  ///< full Gram vs identity, max abs
  double cancellation_dev = 0.0;    ///< max |integral of a wavelet|
  double roundtrip_dev = 0.0;       ///< synthesize(analyze(f)) vs f, sup norm
  double plancherel_dev = 0.0;      ///< relative energy mismatch
  bool dimension_ok = false;
};

ExactnessReport verify_exactness(const WaveletBasis& basis, int trials, std::uint64_t seed);

struct DecayReport {
  double C_fit = 0.0;
  double nu_fit = 0.0;
  long violations = 0;  ///< samples above 1.05 * C_fit * exp(-nu_fit t)
  double holder_eta = 0.0;
  long samples = 0;
  long holder_pairs = 0;
};

/// Profiles |psi(x)| sqrt(V(beta, delta^k)) against t = d(beta, x)/delta^k,
/// fits a global exponential envelope, and fits the short-range difference
/// quotient exponent.
DecayReport verify_decay(const WaveletBasis& basis);

struct LowerBoundReport {
  double eps0 = 0.0;
  double c_lower = 0.0;    ///< min over wavelets, min over W of |psi| sqrt(mu(Q))
  double c3_min = 0.0;     ///< min over wavelets of |psi(beta)| sqrt(mu^{k+1}_beta)
  double min_ratio = 0.0;  ///< min over wavelets of V(beta, eps0 delta^k)/mu(Q)
  bool feasible = false;
};

/// Largest eps0 in {2^-1, ..., 2^-12} whose core balls are contained in the
/// parent cubes and carry a strictly positive wavelet floor.
LowerBoundReport verify_lower_bound(const WaveletBasis& basis);

}  // namespace homwave
