#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "homwave/wavelets.hpp"

namespace homwave {

struct Ball {
  int center = 0;
  double radius = 0.0;
};

/// Weighted L^q norm; q may be infinity.
double lq_norm(const MetricMeasureSpace& space, const Eigen::VectorXd& f, double q);

struct Atom {
  Eigen::VectorXd values;
  Ball ball;
  double q = 2.0;
};

/// Random mean-zero function supported in the (open) ball, rescaled to
/// saturate ||a||_q = mu(B)^{1/q-1}. Needs at least two ball points.
Atom make_atom(const MetricMeasureSpace& space, const Ball& ball, double q, std::uint64_t seed);

struct AtomReport {
  bool support_ok = false;
  bool norm_ok = false;
  bool mean_ok = false;
  double lq = 0.0, bound = 0.0, mean = 0.0;
  bool ok() const { return support_ok && norm_ok && mean_ok; }
};

AtomReport validate_atom(const MetricMeasureSpace& space, const Eigen::VectorXd& f,
                         const Ball& ball, double q);

struct MoleculeReport {
  bool m1_ok = false;        ///< ||m||_q <= mu(B)^{1/q-1}
  bool m2_ok = true;         ///< annulus bounds against the given eta sequence
  bool mean_ok = false;      ///< |sum w m| <= 1e-10
  double lq = 0.0, bound = 0.0, mean = 0.0;
  double excess = 0.0;       ///< lq / bound, the constant when m1 fails
  std::vector<double> eta;   ///< measured minimal annulus constants, k = 1, 2, ...
  double eta_weighted_sum = 0.0;  ///< sum of k * eta_k
  bool ok() const { return m1_ok && m2_ok && mean_ok; }
};

/// Measures the smallest annulus constants making the molecule bounds hold;
/// when an explicit eta sequence is given the bounds are also checked
/// against it (missing tail entries are treated as zero).
MoleculeReport validate_molecule(const MetricMeasureSpace& space, const Eigen::VectorXd& f,
                                 const Ball& ball, double q,
                                 const std::vector<double>* eta_bound = nullptr);

/// Square-function norms on the wavelet span. Coefficients align with
/// basis.items(); coarse coefficients never enter (callers report coarse
/// energy separately).
///   iii: weights |psi|^2,  iv: cube indicators over mu(Q),  v: core-ball
///   indicators over mu(Q).
double norm_iii(const WaveletBasis& basis, const Eigen::VectorXd& coeffs);
double norm_iv(const WaveletBasis& basis, const Eigen::VectorXd& coeffs);
double norm_v(const WaveletBasis& basis, const Eigen::VectorXd& coeffs);

struct DecompositionPiece {
  int k = 0;           ///< stopping height: the piece came from E_k
  int theta = 0;       ///< net point of the selected maximal cube
  int cube_level = 0;  ///< level of that cube
  double lambda = 0.0;
  Ball ball;           ///< (x_theta, 8 delta^{cube_level})
  std::vector<int> indices;  ///< positions into basis.items()
  Eigen::VectorXd molecule;  ///< values on the cloud, L2-coherent with lambda
};

struct LevelSetInfo {
  int k = 0;
  double omega_mass = 0.0;
  int selected = 0;  ///< cubes in C_k
  int retired = 0;   ///< cubes in E_k = C_k minus C_{k+1}
  int maximal = 0;
};

struct AtomicDecomposition {
  std::vector<DecompositionPiece> pieces;
  std::vector<LevelSetInfo> levels;
  double total_lambda = 0.0;
  double phi_l1 = 0.0;
  double C2 = 0.0;
  int k_lo = 0, k_hi = 0;
  double resynthesis_dev = 0.0;
  bool partition_ok = false;
};

/// Stopping-time decomposition of a wavelet coefficient field into scaled
/// molecules: level sets of the core-ball square function phi, cubes kept
/// while mu(Omega_k meet Q) > mu(Q)/(2 C2), grouped under maximal selected
/// cubes, each group synthesized and normalized by
/// lambda = V(x_theta, 8 delta^j)^{1/2} ||A||_{L2}.
AtomicDecomposition decompose(const WaveletBasis& basis, const Eigen::VectorXd& coeffs);

/// Pointwise max of cube averages of |f| over all levels. Exact.
Eigen::VectorXd dyadic_maximal(const DyadicSystem& cubes, const Eigen::VectorXd& f);

/// Pointwise max of open-ball averages of |f| over all centers and radii.
/// Exact on the finite cloud (only tie-complete neighbor prefixes are balls).
Eigen::VectorXd hl_maximal(const MetricMeasureSpace& space, const Eigen::VectorXd& f);

struct LevelSetCheck {
  double lambda = 0.0;
  double mass = 0.0;      ///< mu{Mdy f > lambda}
  double bound = 0.0;     ///< ||f||_1 / lambda
  bool covered_ok = false;   ///< level set = disjoint union of maximal cubes
  bool disjoint_ok = false;
};

struct Weak11Report {
  std::vector<LevelSetCheck> rows;
  double max_ratio = 0.0;  ///< max of lambda * mass / ||f||_1
  bool ok = false;         ///< every mass <= bound and structure checks pass
};

Weak11Report weak11_check(const DyadicSystem& cubes, const Eigen::VectorXd& f,
                          const std::vector<double>& lambdas);

Eigen::VectorXd random_sign_synthesis(const WaveletBasis& basis, const Eigen::VectorXd& coeffs,
                                      const Eigen::VectorXd& signs);

/// (mean over trials of |sum_i lambda_i w_i|^q)^{1/q} / ||lambda||_2 with
/// independent uniform signs w_i.
double khintchine_ratio(const Eigen::VectorXd& coeffs, int trials, double q,
                        std::uint64_t seed);

struct SignSynthesisReport {
  double isometry_dev = 0.0;  ///< max relative |  ||T_e f||_2 - ||coeffs||_2 |
  double lhs = 0.0;           ///< L1 norm of the coefficient square function
  double sampled_max = 0.0;   ///< max over draws of ||T_e f||_1
  bool sampled_max_is_lower_bound = true;  ///< the true sup is >= sampled_max
  bool ok = false;            ///< lhs <= sampled_max * (1 + slack)
};

SignSynthesisReport square_function_vs_signs(const WaveletBasis& basis,
                                             const Eigen::VectorXd& coeffs, int trials,
                                             std::uint64_t seed, double slack);

struct CzReport {
  double size_const = 0.0;     ///< sup over x != y of |K(x,y)| V(x, d(x,y)), first draw
  double size_min = 0.0, size_max = 0.0;  ///< across draws
  double stability_factor = 0.0;          ///< size_max / size_min
  double holder_exp = 0.0;
  double holder_const = 0.0;
  long holder_samples = 0;
  int draws = 0;
  bool finite = false;
};

/// Assembles K(x,y) = sum_i eps_i psi_i(x) psi_i(y) over the listed levels
/// (empty list = all levels) for several sign draws; measures the size
/// constant and a Hoelder exponent on seeded triples with d(x,y) >= 2 d(x,x~).
CzReport cz_kernel_check(const WaveletBasis& basis, const std::vector<int>& levels, int draws,
                         std::uint64_t seed, int holder_samples = 20000);

struct DominationReport {
  double worst = 0.0;  ///< min over wavelets, min over Q of M(chi_W)^{1/s}
  int worst_item = -1;
  bool ok = false;
};

/// Verifies that the maximal function of each core-ball indicator stays
/// bounded below on the whole parent cube.
DominationReport maximal_domination_check(const WaveletBasis& basis, double s);

struct EquivalenceBand {
  double lo35 = 0.0, hi35 = 0.0;  ///< norm_iii / norm_v over the family
  double lo45 = 0.0, hi45 = 0.0;  ///< norm_iv / norm_v
  double max_coarse_frac = 0.0;   ///< largest coarse energy fraction seen
  int family = 0;
};

/// Ratios of the three square-function norms over a family of random atoms
/// projected onto the wavelet span.
EquivalenceBand norm_equivalence_band(const WaveletBasis& basis, int family,
                                      std::uint64_t seed);

/// Report of M against M^dy in both directions on sampled functions: the
/// empirical constants sup M^dy/M and sup M/M^dy with their argmax points.
struct MaximalComparison {
  double dy_over_hl = 0.0;
  double hl_over_dy = 0.0;
  int arg_dy_over_hl = -1;
  int arg_hl_over_dy = -1;
};

MaximalComparison compare_maximals(const DyadicSystem& cubes, const Eigen::VectorXd& f);

}  // namespace homwave
