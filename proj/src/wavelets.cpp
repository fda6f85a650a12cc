#include "homwave/wavelets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "homwave/rng.hpp"

namespace homwave {

namespace {

// A^T diag(w) B for column-function matrices.
Eigen::MatrixXd wprod(const Eigen::VectorXd& w, const Eigen::MatrixXd& a,
                      const Eigen::MatrixXd& b) {
  return a.transpose() * (b.array().colwise() * w.array()).matrix();
}

void check_symmetric(const Eigen::MatrixXd& m) {
  require(m.rows() == m.cols(), "inv_sqrt needs a square matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
          "inv_sqrt needs a symmetric matrix");
}

}  // namespace

std::vector<double> neumann_coefficients(int count) {
  require(count >= 0, "coefficient count must be nonnegative");
  std::vector<double> p(count);
  if (count == 0) return p;
  p[0] = 1.0;
  for (int i = 1; i < count; ++i) p[i] = p[i - 1] * (2.0 * i - 1.0) / (2.0 * i);
  return p;
}

Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& m, InvSqrtMethod method, double tol,
                         int max_terms) {
  check_symmetric(m);
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  const int d = static_cast<int>(sym.rows());
  Eigen::MatrixXd s;
  if (method == InvSqrtMethod::eig) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    require(es.info() == Eigen::Success, "eigendecomposition failed");
    require(es.eigenvalues().minCoeff() > 0.0, "matrix is not positive definite");
    s = es.eigenvectors() *
        es.eigenvalues().array().rsqrt().matrix().asDiagonal() *
        es.eigenvectors().transpose();
    s = 0.5 * (s + s.transpose()).eval();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    require(es.info() == Eigen::Success, "eigendecomposition failed");
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    require(lo > 0.0, "matrix is not positive definite");
    const double c = hi;
    const double front = 1.0 / std::sqrt(2.0 * c);
    const Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(d, d) - sym / (2.0 * c);
    // A is symmetric with spectrum in [1 - hi/(2c), 1 - lo/(2c)], so
    // ||A^n||_2 = rho^n with rho = 1 - lo/(2c) and the truncated tail is at
    // most front * p_n * rho^{n+1} / (1 - rho). The threshold carries an
    // extra lo/hi so the tail survives the S M S residual amplification.
    const double rho = 1.0 - lo / (2.0 * c);
    const double threshold = tol * lo / (10.0 * hi);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(d, d);
    s = Eigen::MatrixXd::Zero(d, d);
    double coeff = 1.0;
    double rho_pow = rho;
    bool converged = false;
    for (int i = 0; i < max_terms; ++i) {
      if (i > 0) {
        coeff *= (2.0 * i - 1.0) / (2.0 * i);
        term = (term * a).eval();
        rho_pow *= rho;
      }
      s.noalias() += coeff * term;
      if (front * coeff * rho_pow / (1.0 - rho) < threshold) {
        converged = true;
        break;
      }
    }
    require(converged, "series did not converge within the term cap");
    s *= front;
    s = 0.5 * (s + s.transpose()).eval();
  }
  const double resid =
      (s * sym * s - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
  require(resid <= tol, "inverse square root residual exceeds tolerance");
  return s;
}

MraLadder build_ladder(const SplineSystem& splines) {
  const int levels = splines.nets->level_count();
  MraLadder ladder;
  ladder.values.resize(levels);
  ladder.gap.assign(levels, 0.0);
  ladder.values[levels - 1] = splines.values[levels - 1];
  for (int l = levels - 2; l >= 0; --l) {
    ladder.values[l].noalias() = splines.p_coeffs[l] * ladder.values[l + 1];
    ladder.gap[l] = (ladder.values[l] - splines.values[l]).cwiseAbs().maxCoeff();
  }
  return ladder;
}

namespace {

// Shared transition machinery; fills gd and, when requested, the projected
// orthonormal-ready column family (before inverse square root).
void transition_data(const SplineSystem& sp, const MraLadder& ladder, int k, GramData* gd,
                     Eigen::MatrixXd* proj_out) {
  const NetHierarchy& nets = *sp.nets;
  const MetricMeasureSpace& space = nets.space();
  const Eigen::VectorXd& w = space.weights();
  const int l = nets.level_index(k);

  gd->k = k;
  {
    const Eigen::MatrixXd st = sp.values[l].transpose();
    Eigen::MatrixXd raw = wprod(w, st, st);
    const Eigen::VectorXd dn = sp.mu[l].array().rsqrt();
    gd->M = dn.asDiagonal() * raw * dn.asDiagonal();
    gd->M = 0.5 * (gd->M + gd->M.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gd->M, Eigen::EigenvaluesOnly);
    gd->m_min_eig = es.eigenvalues().minCoeff();
    gd->m_max_eig = es.eigenvalues().maxCoeff();
    if (gd->m_min_eig < 1e-10 * gd->m_max_eig) gd->ill_conditioned = true;
  }

  if (k >= nets.k_max()) return;
  const std::vector<int> fresh = nets.new_points(k);
  if (fresh.empty()) return;

  const Eigen::MatrixXd base = ladder.values[l].transpose();
  Eigen::MatrixXd y(space.size(), fresh.size());
  for (std::size_t j = 0; j < fresh.size(); ++j) {
    const int row = nets.row_of(k + 1, fresh[j]);
    y.col(static_cast<int>(j)) =
        ladder.values[l + 1].row(row).transpose() / std::sqrt(sp.mu[l + 1](row));
  }

  Eigen::MatrixXd gram_base = wprod(w, base, base);
  gram_base = 0.5 * (gram_base + gram_base.transpose()).eval();
  const Eigen::MatrixXd cross = wprod(w, base, y);
  Eigen::MatrixXd proj = y - base * gram_base.ldlt().solve(cross);

  gd->Mtilde = wprod(w, proj, proj);
  gd->Mtilde = 0.5 * (gd->Mtilde + gd->Mtilde.transpose()).eval();
  const Eigen::MatrixXd unproj = wprod(w, y, y);
  gd->projection_discrepancy = (gd->Mtilde - unproj).cwiseAbs().maxCoeff();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gd->Mtilde, Eigen::EigenvaluesOnly);
  gd->mt_min_eig = es.eigenvalues().minCoeff();
  gd->mt_max_eig = es.eigenvalues().maxCoeff();
  gd->mt_norm = std::max(std::abs(gd->mt_min_eig), std::abs(gd->mt_max_eig));
  if (gd->mt_min_eig < 1e-10 * gd->mt_max_eig) gd->ill_conditioned = true;

  if (proj_out) *proj_out = std::move(proj);
}

void fix_signs(Eigen::MatrixXd& cols) {
  for (int j = 0; j < cols.cols(); ++j) {
    const double top = cols.col(j).cwiseAbs().maxCoeff();
    if (top == 0.0) continue;
    for (int i = 0; i < cols.rows(); ++i) {
      const double v = cols(i, j);
      if (std::abs(v) > 1e-12 * top) {
        if (v < 0.0) cols.col(j) = -cols.col(j);
        break;
      }
    }
  }
}

struct CoreSearch {
  double eps0 = 0.0;
  double c_lower = 0.0;
  double min_ratio = 0.0;
  bool feasible = false;
  std::vector<std::vector<int>> core;
  std::vector<double> core_mass;
};

CoreSearch core_search(const DyadicSystem& cubes, const std::vector<WaveletBasis::Item>& items,
                       const Eigen::MatrixXd& wavelets, const std::vector<double>& cube_mass) {
  const MetricMeasureSpace& space = cubes.space();
  const double delta = cubes.nets().delta();
  CoreSearch best;
  for (int j = 1; j <= 12; ++j) {
    const double eps = std::ldexp(1.0, -j);
    CoreSearch cur;
    cur.eps0 = eps;
    cur.c_lower = std::numeric_limits<double>::infinity();
    cur.min_ratio = std::numeric_limits<double>::infinity();
    cur.feasible = true;
    cur.core.resize(items.size());
    cur.core_mass.resize(items.size());
    for (std::size_t i = 0; i < items.size() && cur.feasible; ++i) {
      const auto& it = items[i];
      const double r = eps * std::pow(delta, it.k);
      std::vector<int> pts = space.ball_points(it.beta, r);
      double floor = std::numeric_limits<double>::infinity();
      for (int x : pts) {
        if (cubes.cube_of(it.k, x) != it.alpha) {
          cur.feasible = false;
          break;
        }
        floor = std::min(floor,
                         std::abs(wavelets(x, static_cast<int>(i))) * std::sqrt(cube_mass[i]));
      }
      if (!cur.feasible || floor <= 0.0) {
        cur.feasible = false;
        break;
      }
      cur.c_lower = std::min(cur.c_lower, floor);
      cur.min_ratio = std::min(cur.min_ratio, space.volume(it.beta, r) / cube_mass[i]);
      cur.core_mass[i] = space.volume(it.beta, r);
      cur.core[i] = std::move(pts);
    }
    if (cur.feasible) return cur;
  }
  return best;
}

}  // namespace

GramData gram(const SplineSystem& splines, int k) {
  require(k >= splines.nets->k_min() && k <= splines.nets->k_max(), "level out of range");
  const MraLadder ladder = build_ladder(splines);
  GramData gd;
  transition_data(splines, ladder, k, &gd, nullptr);
  return gd;
}

WaveletBasis build_wavelets(const SplineSystem& splines, const DyadicSystem& cubes, double tol) {
  const NetHierarchy& nets = *splines.nets;
  require(&cubes.nets() == &nets, "cubes and splines must share one net hierarchy");
  const MetricMeasureSpace& space = nets.space();
  const int n = space.size();
  require(static_cast<int>(nets.net(nets.k_max()).size()) == n,
          "finest net must contain every cloud point");

  const MraLadder ladder = build_ladder(splines);
  WaveletBasis basis;
  basis.cubes_ = &cubes;
  basis.splines_ = &splines;
  basis.ladder_gap_ = ladder.gap;

  std::vector<Eigen::MatrixXd> blocks;
  for (int k = nets.k_min(); k < nets.k_max(); ++k) {
    GramData gd;
    Eigen::MatrixXd proj;
    transition_data(splines, ladder, k, &gd, &proj);
    basis.gram_info_.push_back(gd);
    const std::vector<int> fresh = nets.new_points(k);
    if (fresh.empty()) continue;
    if (gd.mt_min_eig <= 0.0 || gd.mt_min_eig < 1e-10 * gd.mt_max_eig) {
      basis.excluded_levels_.push_back(k);
      continue;
    }
    Eigen::MatrixXd psi;
    try {
      psi = proj * inv_sqrt(gd.Mtilde, InvSqrtMethod::eig, tol);
    } catch (const Error&) {
      basis.excluded_levels_.push_back(k);
      continue;
    }
    fix_signs(psi);
    blocks.push_back(std::move(psi));
    for (int beta : fresh) {
      const int alpha = cubes.parent_of(k, beta);
      basis.items_.push_back({k, alpha, beta});
      basis.cube_mass_.push_back(cubes.cube_mass(k, alpha));
    }
  }

  int total = 0;
  for (const auto& b : blocks) total += static_cast<int>(b.cols());
  basis.wavelets_.resize(n, total);
  int at = 0;
  for (const auto& b : blocks) {
    basis.wavelets_.middleCols(at, static_cast<int>(b.cols())) = b;
    at += static_cast<int>(b.cols());
  }

  {
    const Eigen::MatrixXd base = ladder.values[0].transpose();
    Eigen::MatrixXd g0 = wprod(space.weights(), base, base);
    g0 = 0.5 * (g0 + g0.transpose()).eval();
    basis.coarse_ = base * inv_sqrt(g0, InvSqrtMethod::eig, tol);
    fix_signs(basis.coarse_);
    basis.coarse_alphas_ = nets.net(nets.k_min());
  }

  CoreSearch cs = core_search(cubes, basis.items_, basis.wavelets_, basis.cube_mass_);
  require(cs.feasible, "no dyadic core radius down to 2^-12 works for every wavelet");
  basis.eps0_ = cs.eps0;
  basis.c_lower_ = cs.c_lower;
  basis.min_core_ratio_ = cs.min_ratio;
  basis.core_ = std::move(cs.core);
  basis.core_mass_ = std::move(cs.core_mass);

  double c3 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < basis.items_.size(); ++i) {
    const auto& it = basis.items_[i];
    const int row = nets.row_of(it.k + 1, it.beta);
    const double m = splines.mu[nets.level_index(it.k) + 1](row);
    c3 = std::min(c3, std::abs(basis.wavelets_(it.beta, static_cast<int>(i))) * std::sqrt(m));
  }
  basis.c3_min_ = basis.items_.empty() ? 0.0 : c3;
  return basis;
}

CoefficientField analyze(const WaveletBasis& basis, const Eigen::VectorXd& f) {
  const Eigen::VectorXd& w = basis.space().weights();
  require(f.size() == w.size(), "function vector has the wrong length");
  const Eigen::VectorXd wf = (f.array() * w.array()).matrix();
  CoefficientField c;
  c.wavelet = basis.wavelet_values().transpose() * wf;
  c.coarse = basis.coarse_values().transpose() * wf;
  return c;
}

Eigen::VectorXd synthesize(const WaveletBasis& basis, const CoefficientField& coeffs) {
  require(coeffs.wavelet.size() == basis.wavelet_values().cols() &&
              coeffs.coarse.size() == basis.coarse_values().cols(),
          "coefficient field does not match the basis");
  return basis.wavelet_values() * coeffs.wavelet + basis.coarse_values() * coeffs.coarse;
}

ExactnessReport verify_exactness(const WaveletBasis& basis, int trials, std::uint64_t seed) {
  const MetricMeasureSpace& space = basis.space();
  const Eigen::VectorXd& w = space.weights();
  const int n = space.size();
  const int m = static_cast<int>(basis.wavelet_values().cols() + basis.coarse_values().cols());

  Eigen::MatrixXd phi(n, m);
  phi << basis.coarse_values(), basis.wavelet_values();
  const Eigen::MatrixXd g = wprod(w, phi, phi);

  ExactnessReport rep;
  rep.dimension_ok = (m == n);
  rep.orthonormality_dev = (g - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
  rep.cancellation_dev =
      (basis.wavelet_values().transpose() * w).cwiseAbs().maxCoeff();

  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd f(n);
    for (int i = 0; i < n; ++i) f(i) = rng.normal();
    const CoefficientField c = analyze(basis, f);
    const Eigen::VectorXd back = synthesize(basis, c);
    rep.roundtrip_dev = std::max(rep.roundtrip_dev, (back - f).cwiseAbs().maxCoeff());
    const double energy = (f.array().square() * w.array()).sum();
    const double coeff_energy = c.wavelet.squaredNorm() + c.coarse.squaredNorm();
    rep.plancherel_dev =
        std::max(rep.plancherel_dev, std::abs(energy - coeff_energy) / energy);
  }
  return rep;
}

DecayReport verify_decay(const WaveletBasis& basis) {
  const MetricMeasureSpace& space = basis.space();
  const double delta = basis.cubes().nets().delta();
  const int n = space.size();
  DecayReport rep;

  const double bin_width = 0.5;
  std::vector<double> bin_max;
  const auto record = [&](double t, double p) {
    const std::size_t b = static_cast<std::size_t>(t / bin_width);
    if (bin_max.size() <= b) bin_max.resize(b + 1, 0.0);
    bin_max[b] = std::max(bin_max[b], p);
  };

  for (std::size_t i = 0; i < basis.items().size(); ++i) {
    const auto& it = basis.items()[i];
    const double sc = std::pow(delta, it.k);
    const double root_v = std::sqrt(space.volume(it.beta, sc));
    for (int x = 0; x < n; ++x) {
      const double p = std::abs(basis.wavelet_values()(x, static_cast<int>(i))) * root_v;
      if (p <= 0.0) continue;
      record(space.dist(it.beta, x) / sc, p);
      ++rep.samples;
    }
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  long used = 0;
  for (std::size_t b = 0; b < bin_max.size(); ++b) {
    if (bin_max[b] <= 0.0) continue;
    const double x = (b + 0.5) * bin_width;
    const double y = std::log(bin_max[b]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++used;
  }
  if (used >= 2) {
    const double slope = (used * sxy - sx * sy) / (used * sxx - sx * sx);
    rep.nu_fit = -slope;
  }

  double hx = 0.0, hy = 0.0, hxx = 0.0, hxy = 0.0;
  for (std::size_t i = 0; i < basis.items().size(); ++i) {
    const auto& it = basis.items()[i];
    const double sc = std::pow(delta, it.k);
    const double root_v = std::sqrt(space.volume(it.beta, sc));
    const int stride = std::max(1, n / 64);
    for (int x = it.beta % stride; x < n; x += stride) {
      const auto& order = space.neighbor_order(x);
      for (int j = 1; j < static_cast<int>(order.size()) && j <= 8; ++j) {
        const double d = space.sorted_dist(x, j);
        if (d > sc) break;
        const double diff = std::abs(basis.wavelet_values()(x, static_cast<int>(i)) -
                                     basis.wavelet_values()(order[j], static_cast<int>(i))) *
                            root_v;
        if (diff <= 0.0) continue;
        const double lx = std::log(d / sc);
        const double ly = std::log(diff);
        hx += lx;
        hy += ly;
        hxx += lx * lx;
        hxy += lx * ly;
        ++rep.holder_pairs;
      }
    }
  }
  if (rep.holder_pairs >= 2) {
    const double denom = rep.holder_pairs * hxx - hx * hx;
    if (denom > 0.0) rep.holder_eta = (rep.holder_pairs * hxy - hx * hy) / denom;
  }

  if (rep.nu_fit > 0.0) {
    double c_fit = 0.0;
    for (std::size_t i = 0; i < basis.items().size(); ++i) {
      const auto& it = basis.items()[i];
      const double sc = std::pow(delta, it.k);
      const double root_v = std::sqrt(space.volume(it.beta, sc));
      for (int x = 0; x < n; ++x) {
        const double p = std::abs(basis.wavelet_values()(x, static_cast<int>(i))) * root_v;
        if (p <= 0.0) continue;
        c_fit = std::max(c_fit, p * std::exp(rep.nu_fit * space.dist(it.beta, x) / sc));
      }
    }
    rep.C_fit = c_fit;
    for (std::size_t i = 0; i < basis.items().size(); ++i) {
      const auto& it = basis.items()[i];
      const double sc = std::pow(delta, it.k);
      const double root_v = std::sqrt(space.volume(it.beta, sc));
      for (int x = 0; x < n; ++x) {
        const double p = std::abs(basis.wavelet_values()(x, static_cast<int>(i))) * root_v;
        if (p > 1.05 * rep.C_fit * std::exp(-rep.nu_fit * space.dist(it.beta, x) / sc))
          ++rep.violations;
      }
    }
  }
  return rep;
}

LowerBoundReport verify_lower_bound(const WaveletBasis& basis) {
  std::vector<double> mass(basis.items().size());
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = basis.cube_mass(static_cast<int>(i));
  const CoreSearch cs =
      core_search(basis.cubes(), basis.items(), basis.wavelet_values(), mass);
  LowerBoundReport rep;
  rep.feasible = cs.feasible;
  rep.eps0 = cs.eps0;
  rep.c_lower = cs.c_lower;
  rep.min_ratio = cs.min_ratio;
  rep.c3_min = basis.c3_min();
  return rep;
}

}  // namespace homwave
