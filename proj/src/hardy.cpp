#include "homwave/hardy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "homwave/rng.hpp"

namespace homwave {

namespace {

double lq_exponent(double q) {
  return (std::isinf(q) ? 0.0 : 1.0 / q) - 1.0;
}

}  // namespace

double lq_norm(const MetricMeasureSpace& space, const Eigen::VectorXd& f, double q) {
  require(f.size() == space.size(), "function vector has the wrong length");
  require(q >= 1.0, "exponent must lie in [1, inf]");
  if (std::isinf(q)) return f.cwiseAbs().maxCoeff();
  double acc = 0.0;
  for (int i = 0; i < f.size(); ++i) acc += space.weight(i) * std::pow(std::abs(f(i)), q);
  return std::pow(acc, 1.0 / q);
}

Atom make_atom(const MetricMeasureSpace& space, const Ball& ball, double q, std::uint64_t seed) {
  require(q > 1.0, "atom exponent must lie in (1, inf]");
  const std::vector<int> pts = space.ball_points(ball.center, ball.radius);
  require(pts.size() >= 2, "an atom needs a ball with at least two points");
  Rng rng(seed);
  Atom atom;
  atom.ball = ball;
  atom.q = q;
  atom.values = Eigen::VectorXd::Zero(space.size());
  double top = 0.0;
  while (top == 0.0) {
    double mass = 0.0, mean = 0.0;
    for (int p : pts) {
      atom.values(p) = rng.uniform(-1.0, 1.0);
      mass += space.weight(p);
      mean += space.weight(p) * atom.values(p);
    }
    mean /= mass;
    for (int p : pts) {
      atom.values(p) -= mean;
      top = std::max(top, std::abs(atom.values(p)));
    }
  }
  const double bound = std::pow(space.volume(ball.center, ball.radius), lq_exponent(q));
  atom.values *= bound / lq_norm(space, atom.values, q);
  return atom;
}

AtomReport validate_atom(const MetricMeasureSpace& space, const Eigen::VectorXd& f,
                         const Ball& ball, double q) {
  require(f.size() == space.size(), "function vector has the wrong length");
  require(q > 1.0, "atom exponent must lie in (1, inf]");
  AtomReport rep;
  rep.support_ok = true;
  for (int i = 0; i < f.size(); ++i)
    if (f(i) != 0.0 && space.dist(ball.center, i) >= ball.radius) rep.support_ok = false;
  rep.lq = lq_norm(space, f, q);
  rep.bound = std::pow(space.volume(ball.center, ball.radius), lq_exponent(q));
  rep.norm_ok = rep.lq <= rep.bound * (1.0 + 1e-12);
  rep.mean = f.dot(space.weights());
  rep.mean_ok = std::abs(rep.mean) <= 1e-10;
  return rep;
}

MoleculeReport validate_molecule(const MetricMeasureSpace& space, const Eigen::VectorXd& f,
                                 const Ball& ball, double q,
                                 const std::vector<double>* eta_bound) {
  require(f.size() == space.size(), "function vector has the wrong length");
  require(q > 1.0, "molecule exponent must lie in (1, inf]");
  require(ball.radius > 0.0, "molecule ball needs a positive radius");
  MoleculeReport rep;
  rep.lq = lq_norm(space, f, q);
  rep.bound = std::pow(space.volume(ball.center, ball.radius), lq_exponent(q));
  rep.excess = rep.lq / rep.bound;
  rep.m1_ok = rep.lq <= rep.bound * (1.0 + 1e-12);
  rep.mean = f.dot(space.weights());
  rep.mean_ok = std::abs(rep.mean) <= 1e-10;

  for (int k = 1;; ++k) {
    const double lo = std::ldexp(ball.radius, k - 1);
    const double hi = std::ldexp(ball.radius, k);
    if (lo > space.diameter()) break;
    Eigen::VectorXd piece = Eigen::VectorXd::Zero(f.size());
    bool any = false;
    for (int i = 0; i < f.size(); ++i) {
      const double d = space.dist(ball.center, i);
      if (d >= lo && d < hi) {
        piece(i) = f(i);
        any = true;
      }
    }
    const double denom = std::pow(2.0, k * lq_exponent(q)) * rep.bound;
    const double eta = any ? lq_norm(space, piece, q) / denom : 0.0;
    rep.eta.push_back(eta);
    rep.eta_weighted_sum += k * eta;
    if (eta_bound) {
      const double cap = k <= static_cast<int>(eta_bound->size()) ? (*eta_bound)[k - 1] : 0.0;
      if (eta > cap * (1.0 + 1e-12) + 1e-15) rep.m2_ok = false;
    }
  }
  return rep;
}

namespace {

// phi^2 aggregation shared by the three norms: adds c to sq over the points
// of each item's carrier set.
double square_function_l1(const WaveletBasis& basis, Eigen::VectorXd sq) {
  return basis.space().weights().dot(sq.cwiseSqrt().eval());
}

}  // namespace

double norm_iii(const WaveletBasis& basis, const Eigen::VectorXd& coeffs) {
  require(coeffs.size() == basis.size(), "coefficients do not match the basis");
  const Eigen::VectorXd sq =
      basis.wavelet_values().array().square().matrix() * coeffs.array().square().matrix();
  return square_function_l1(basis, sq);
}

double norm_iv(const WaveletBasis& basis, const Eigen::VectorXd& coeffs) {
  require(coeffs.size() == basis.size(), "coefficients do not match the basis");
  const DyadicSystem& cubes = basis.cubes();
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(basis.space().size());
  for (int i = 0; i < basis.size(); ++i) {
    if (coeffs(i) == 0.0) continue;
    const auto& it = basis.items()[i];
    const double c = coeffs(i) * coeffs(i) / basis.cube_mass(i);
    for (int x : cubes.members(it.k, it.alpha)) sq(x) += c;
  }
  return square_function_l1(basis, sq);
}

double norm_v(const WaveletBasis& basis, const Eigen::VectorXd& coeffs) {
  require(coeffs.size() == basis.size(), "coefficients do not match the basis");
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(basis.space().size());
  for (int i = 0; i < basis.size(); ++i) {
    if (coeffs(i) == 0.0) continue;
    const double c = coeffs(i) * coeffs(i) / basis.cube_mass(i);
    for (int x : basis.core(i)) sq(x) += c;
  }
  return square_function_l1(basis, sq);
}

AtomicDecomposition decompose(const WaveletBasis& basis, const Eigen::VectorXd& coeffs) {
  require(coeffs.size() == basis.size(), "coefficients do not match the basis");
  const MetricMeasureSpace& space = basis.space();
  const DyadicSystem& cubes = basis.cubes();
  const NetHierarchy& nets = cubes.nets();
  const int n = space.size();

  AtomicDecomposition out;
  std::vector<int> live;
  for (int i = 0; i < coeffs.size(); ++i)
    if (coeffs(i) != 0.0) live.push_back(i);
  if (live.empty()) {
    out.partition_ok = true;
    return out;
  }

  Eigen::VectorXd phi2 = Eigen::VectorXd::Zero(n);
  for (int i : live) {
    const double c = coeffs(i) * coeffs(i) / basis.cube_mass(i);
    for (int x : basis.core(i)) phi2(x) += c;
  }
  const Eigen::VectorXd phi = phi2.cwiseSqrt();
  out.phi_l1 = space.weights().dot(phi);

  for (int i = 0; i < basis.size(); ++i)
    out.C2 = std::max(out.C2, basis.cube_mass(i) / basis.core_mass(i));

  double minpos = std::numeric_limits<double>::infinity();
  double maxv = 0.0;
  for (int x = 0; x < n; ++x) {
    if (phi(x) > 0.0) minpos = std::min(minpos, phi(x));
    maxv = std::max(maxv, phi(x));
  }
  out.k_lo = static_cast<int>(std::floor(std::log2(minpos))) - 1;
  out.k_hi = static_cast<int>(std::floor(std::log2(maxv))) + 1;
  while (std::ldexp(1.0, out.k_hi) >= maxv) --out.k_hi;

  struct CubeEntry {
    int j = 0, alpha = 0;
    std::vector<int> items;
    int last_k = 0;  // largest k with the cube still selected
  };
  std::vector<CubeEntry> entries;
  std::unordered_map<std::int64_t, int> entry_of;
  const auto key_of = [&](int j, int alpha) {
    return (static_cast<std::int64_t>(nets.level_index(j)) << 32) | alpha;
  };
  for (int i : live) {
    const auto& it = basis.items()[i];
    const std::int64_t key = key_of(it.k, it.alpha);
    auto ins = entry_of.emplace(key, static_cast<int>(entries.size()));
    if (ins.second) entries.push_back({it.k, it.alpha, {}, out.k_lo - 1});
    entries[ins.first->second].items.push_back(i);
  }

  const int kspan = out.k_hi - out.k_lo + 1;
  std::vector<std::unordered_set<std::int64_t>> selected(kspan);
  for (auto& e : entries) {
    const double mass = cubes.cube_mass(e.j, e.alpha);
    for (int k = out.k_lo; k <= out.k_hi; ++k) {
      const double bar = std::ldexp(1.0, k);
      double overlap = 0.0;
      for (int x : cubes.members(e.j, e.alpha))
        if (phi(x) > bar) overlap += space.weight(x);
      if (overlap > mass / (2.0 * out.C2)) {
        selected[k - out.k_lo].insert(key_of(e.j, e.alpha));
        e.last_k = k;
      } else {
        break;  // level sets shrink with k, so selection is contiguous
      }
    }
  }

  std::vector<char> assigned(coeffs.size(), 0);
  long assigned_count = 0;
  for (int k = out.k_lo; k <= out.k_hi; ++k) {
    const auto& sel = selected[k - out.k_lo];
    LevelSetInfo info;
    info.k = k;
    const double bar = std::ldexp(1.0, k);
    for (int x = 0; x < n; ++x)
      if (phi(x) > bar) info.omega_mass += space.weight(x);
    info.selected = static_cast<int>(sel.size());

    std::vector<int> sel_levels;
    for (const auto& e : entries)
      if (e.last_k >= k) sel_levels.push_back(e.j);
    std::sort(sel_levels.begin(), sel_levels.end());
    sel_levels.erase(std::unique(sel_levels.begin(), sel_levels.end()), sel_levels.end());

    std::map<std::int64_t, int> piece_of;  // container key -> piece index
    for (const auto& e : entries) {
      if (e.last_k != k) continue;
      ++info.retired;
      int cj = -1, calpha = -1;
      for (int j : sel_levels) {
        if (j > e.j) break;
        const int anc = (j == e.j) ? e.alpha : cubes.ancestor(e.j, e.alpha, j);
        if (sel.count(key_of(j, anc))) {
          cj = j;
          calpha = anc;
          break;
        }
      }
      require(cj >= 0, "stopping-time selection lost a cube");
      const std::int64_t ckey = key_of(cj, calpha);
      auto ins = piece_of.emplace(ckey, static_cast<int>(out.pieces.size()));
      if (ins.second) {
        DecompositionPiece piece;
        piece.k = k;
        piece.theta = calpha;
        piece.cube_level = cj;
        piece.ball = {calpha, 8.0 * std::pow(nets.delta(), cj)};
        out.pieces.push_back(std::move(piece));
      }
      auto& piece = out.pieces[ins.first->second];
      for (int i : e.items) {
        piece.indices.push_back(i);
        assigned[i] = 1;
        ++assigned_count;
      }
    }

    for (const auto& e : entries) {
      if (e.last_k < k) continue;
      bool maximal = true;
      for (int j : sel_levels) {
        if (j >= e.j) break;
        if (sel.count(key_of(j, cubes.ancestor(e.j, e.alpha, j)))) {
          maximal = false;
          break;
        }
      }
      if (maximal) ++info.maximal;
    }
    out.levels.push_back(info);
  }

  out.partition_ok = assigned_count == static_cast<long>(live.size());
  for (int i : live)
    if (!assigned[i]) out.partition_ok = false;

  Eigen::VectorXd resum = Eigen::VectorXd::Zero(n);
  for (auto& piece : out.pieces) {
    double energy = 0.0;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    for (int i : piece.indices) {
      energy += coeffs(i) * coeffs(i);
      a += coeffs(i) * basis.wavelet_values().col(i);
    }
    piece.lambda =
        std::sqrt(space.volume(piece.ball.center, piece.ball.radius)) * std::sqrt(energy);
    piece.molecule = a / piece.lambda;
    out.total_lambda += piece.lambda;
    resum += piece.lambda * piece.molecule;
  }
  const Eigen::VectorXd direct = basis.wavelet_values() * coeffs;
  out.resynthesis_dev = (resum - direct).cwiseAbs().maxCoeff();
  return out;
}

Eigen::VectorXd dyadic_maximal(const DyadicSystem& cubes, const Eigen::VectorXd& f) {
  const NetHierarchy& nets = cubes.nets();
  const MetricMeasureSpace& space = nets.space();
  require(f.size() == space.size(), "function vector has the wrong length");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.size());
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    std::vector<double> avg(space.size(), 0.0);
    for (int alpha : nets.net(k)) {
      double acc = 0.0;
      for (int x : cubes.members(k, alpha)) acc += space.weight(x) * std::abs(f(x));
      avg[alpha] = acc / cubes.cube_mass(k, alpha);
    }
    for (int x = 0; x < space.size(); ++x)
      out(x) = std::max(out(x), avg[cubes.cube_of(k, x)]);
  }
  return out;
}

Eigen::VectorXd hl_maximal(const MetricMeasureSpace& space, const Eigen::VectorXd& f) {
  require(f.size() == space.size(), "function vector has the wrong length");
  const int n = space.size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  std::vector<double> best(n);
  for (int c = 0; c < n; ++c) {
    double acc = 0.0;
    std::vector<double> avg(n);
    for (int j = 0; j < n; ++j) {
      const int y = space.neighbor_order(c)[j];
      acc += space.weight(y) * std::abs(f(y));
      avg[j] = acc / space.weight_prefix(c, j);
    }
    // Only prefixes ending a tie group are genuine open balls.
    double running = 0.0;
    for (int j = n - 1; j >= 0; --j) {
      if (j == n - 1 || space.sorted_dist(c, j + 1) > space.sorted_dist(c, j))
        running = std::max(running, avg[j]);
      best[j] = running;
    }
    for (int x = 0; x < n; ++x) out(x) = std::max(out(x), best[space.rank_of(c, x)]);
  }
  return out;
}

Weak11Report weak11_check(const DyadicSystem& cubes, const Eigen::VectorXd& f,
                          const std::vector<double>& lambdas) {
  const NetHierarchy& nets = cubes.nets();
  const MetricMeasureSpace& space = nets.space();
  const int n = space.size();
  const Eigen::VectorXd mdy = dyadic_maximal(cubes, f);
  const double l1 = space.weights().dot(f.cwiseAbs().eval());

  std::vector<std::vector<double>> avg(nets.level_count());
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    auto& level = avg[nets.level_index(k)];
    level.assign(n, 0.0);
    for (int alpha : nets.net(k)) {
      double acc = 0.0;
      for (int x : cubes.members(k, alpha)) acc += space.weight(x) * std::abs(f(x));
      level[alpha] = acc / cubes.cube_mass(k, alpha);
    }
  }

  Weak11Report rep;
  rep.ok = true;
  for (double lambda : lambdas) {
    require(lambda > 0.0, "threshold must be positive");
    LevelSetCheck row;
    row.lambda = lambda;
    for (int x = 0; x < n; ++x)
      if (mdy(x) > lambda) row.mass += space.weight(x);
    row.bound = l1 / lambda;

    // Maximal cubes with average above lambda: selected without a selected
    // strict ancestor. anc_sel propagates down the parent chains.
    std::vector<int> marks(n, 0);
    row.covered_ok = true;
    row.disjoint_ok = true;
    std::vector<std::vector<char>> anc_sel(nets.level_count());
    for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
      const int t = nets.level_index(k);
      anc_sel[t].assign(n, 0);
      if (k > nets.k_min()) {
        for (int alpha : nets.net(k)) {
          const int up = cubes.parent_of(k - 1, alpha);
          anc_sel[t][alpha] =
              anc_sel[t - 1][up] || (avg[t - 1][up] > lambda);
        }
      }
      for (int alpha : nets.net(k)) {
        if (avg[t][alpha] > lambda && !anc_sel[t][alpha])
          for (int x : cubes.members(k, alpha)) ++marks[x];
      }
    }
    for (int x = 0; x < n; ++x) {
      if (marks[x] > 1) row.disjoint_ok = false;
      if ((marks[x] > 0) != (mdy(x) > lambda)) row.covered_ok = false;
    }

    rep.max_ratio = std::max(rep.max_ratio, lambda * row.mass / l1);
    if (row.mass > row.bound * (1.0 + 1e-12) || !row.covered_ok || !row.disjoint_ok)
      rep.ok = false;
    rep.rows.push_back(row);
  }
  return rep;
}

Eigen::VectorXd random_sign_synthesis(const WaveletBasis& basis, const Eigen::VectorXd& coeffs,
                                      const Eigen::VectorXd& signs) {
  require(coeffs.size() == basis.size() && signs.size() == basis.size(),
          "coefficients do not match the basis");
  return basis.wavelet_values() * coeffs.cwiseProduct(signs);
}

double khintchine_ratio(const Eigen::VectorXd& coeffs, int trials, double q,
                        std::uint64_t seed) {
  require(trials >= 1, "need at least one trial");
  require(q >= 1.0 && !std::isinf(q), "moment exponent must be finite and >= 1");
  const double l2 = coeffs.norm();
  require(l2 > 0.0, "coefficient vector is zero");
  Rng rng(seed);
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    double s = 0.0;
    for (int i = 0; i < coeffs.size(); ++i) s += coeffs(i) * rng.sign();
    acc += std::pow(std::abs(s), q);
  }
  return std::pow(acc / trials, 1.0 / q) / l2;
}

SignSynthesisReport square_function_vs_signs(const WaveletBasis& basis,
                                             const Eigen::VectorXd& coeffs, int trials,
                                             std::uint64_t seed, double slack) {
  require(trials >= 1, "need at least one trial");
  const MetricMeasureSpace& space = basis.space();
  SignSynthesisReport rep;
  rep.lhs = norm_iii(basis, coeffs);
  const double l2 = coeffs.norm();
  Rng rng(seed);
  Eigen::VectorXd signs(basis.size());
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < basis.size(); ++i) signs(i) = rng.sign();
    const Eigen::VectorXd g = random_sign_synthesis(basis, coeffs, signs);
    rep.sampled_max = std::max(rep.sampled_max, space.weights().dot(g.cwiseAbs().eval()));
    if (l2 > 0.0) {
      const double g2 = std::sqrt(space.weights().dot(g.cwiseAbs2().eval()));
      rep.isometry_dev = std::max(rep.isometry_dev, std::abs(g2 - l2) / l2);
    }
  }
  rep.ok = rep.lhs <= rep.sampled_max * (1.0 + slack) + 1e-300;
  return rep;
}

namespace {

Eigen::MatrixXd pairwise_ball_volumes(const MetricMeasureSpace& space) {
  const int n = space.size();
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
  for (int c = 0; c < n; ++c) {
    double boundary = 0.0;  // mass strictly inside the current tie distance
    double acc = 0.0;
    double last = -1.0;
    for (int j = 0; j < n; ++j) {
      const double d = space.sorted_dist(c, j);
      if (d > last) {
        boundary = acc;
        last = d;
      }
      v(c, space.neighbor_order(c)[j]) = boundary;
      acc += space.weight(space.neighbor_order(c)[j]);
    }
  }
  return v;
}

}  // namespace

CzReport cz_kernel_check(const WaveletBasis& basis, const std::vector<int>& levels, int draws,
                         std::uint64_t seed, int holder_samples) {
  require(draws >= 1, "need at least one draw");
  const MetricMeasureSpace& space = basis.space();
  const int n = space.size();

  std::vector<int> included;
  for (int i = 0; i < basis.size(); ++i) {
    const int k = basis.items()[i].k;
    if (levels.empty() || std::find(levels.begin(), levels.end(), k) != levels.end())
      included.push_back(i);
  }
  CzReport rep;
  rep.draws = draws;
  if (included.empty()) return rep;

  Eigen::MatrixXd psi(n, included.size());
  for (std::size_t j = 0; j < included.size(); ++j)
    psi.col(static_cast<int>(j)) = basis.wavelet_values().col(included[j]);
  const Eigen::MatrixXd vxy = pairwise_ball_volumes(space);

  rep.finite = true;
  rep.size_min = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  Eigen::MatrixXd first_kernel;
  for (int t = 0; t < draws; ++t) {
    Eigen::VectorXd eps(psi.cols());
    for (int i = 0; i < eps.size(); ++i) eps(i) = rng.sign();
    const Eigen::MatrixXd kernel = psi * eps.asDiagonal() * psi.transpose();
    double size = 0.0;
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) {
        if (x == y) continue;
        const double v = std::abs(kernel(x, y)) * vxy(x, y);
        if (!std::isfinite(v)) rep.finite = false;
        size = std::max(size, v);
      }
    if (t == 0) {
      rep.size_const = size;
      first_kernel = kernel;
    }
    rep.size_min = std::min(rep.size_min, size);
    rep.size_max = std::max(rep.size_max, size);
  }
  rep.stability_factor = rep.size_min > 0.0 ? rep.size_max / rep.size_min
                                            : std::numeric_limits<double>::infinity();

  Rng hrng = Rng::derived(seed, 0x9a1f);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::vector<std::pair<double, double>> pts;
  const std::uint64_t hop = std::min<std::uint64_t>(8, n - 1);
  for (int s = 0; s < holder_samples; ++s) {
    const int x = static_cast<int>(hrng.below(static_cast<std::uint64_t>(n)));
    const int xt = space.neighbor_order(x)[1 + static_cast<int>(hrng.below(hop))];
    const int y = static_cast<int>(hrng.below(static_cast<std::uint64_t>(n)));
    const double dxt = space.dist(x, xt);
    const double dxy = space.dist(x, y);
    if (dxt <= 0.0 || dxy < 2.0 * dxt) continue;
    const double quot = std::abs(first_kernel(x, y) - first_kernel(xt, y)) * vxy(x, y);
    if (quot <= 0.0) continue;
    const double lx = std::log(dxt / dxy);
    const double ly = std::log(quot);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    pts.emplace_back(lx, ly);
    ++rep.holder_samples;
  }
  if (rep.holder_samples >= 2) {
    const double m = static_cast<double>(rep.holder_samples);
    const double denom = m * sxx - sx * sx;
    if (denom > 0.0) rep.holder_exp = (m * sxy - sx * sy) / denom;
    for (const auto& [lx, ly] : pts)
      rep.holder_const = std::max(rep.holder_const, std::exp(ly - rep.holder_exp * lx));
  }
  if (!first_kernel.allFinite()) rep.finite = false;
  return rep;
}

namespace {

// Exact M(chi_W)(x) at the query points: per center, only tie-complete
// neighbor prefixes are balls, and within a run of constant W-overlap the
// smallest admissible prefix maximizes the average.
void indicator_maximal_at(const MetricMeasureSpace& space, const std::vector<int>& w_pts,
                          const std::vector<int>& queries, std::vector<double>& out) {
  const int n = space.size();
  out.assign(queries.size(), 0.0);
  std::vector<int> ranks;
  std::vector<double> cw, ratio, suff;
  for (int c = 0; c < n; ++c) {
    ranks.clear();
    for (int p : w_pts) ranks.push_back(space.rank_of(c, p));
    std::sort(ranks.begin(), ranks.end());
    const auto first_valid = [&](int j) {
      while (j + 1 < n && space.sorted_dist(c, j + 1) == space.sorted_dist(c, j)) ++j;
      return j;
    };
    cw.assign(ranks.size(), 0.0);
    for (std::size_t t = 0; t < ranks.size(); ++t)
      cw[t] = (t ? cw[t - 1] : 0.0) + space.weight(space.neighbor_order(c)[ranks[t]]);
    const auto mass_below = [&](int j) {
      const auto it = std::upper_bound(ranks.begin(), ranks.end(), j);
      return it == ranks.begin() ? 0.0 : cw[(it - ranks.begin()) - 1];
    };
    ratio.assign(ranks.size(), 0.0);
    for (std::size_t t = 0; t < ranks.size(); ++t) {
      const int j = first_valid(ranks[t]);
      ratio[t] = mass_below(j) / space.weight_prefix(c, j);
    }
    suff.assign(ranks.size() + 1, 0.0);
    for (int t = static_cast<int>(ranks.size()) - 1; t >= 0; --t)
      suff[t] = std::max(ratio[t], suff[t + 1]);

    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const int j0 = first_valid(space.rank_of(c, queries[qi]));
      double best = mass_below(j0) / space.weight_prefix(c, j0);
      const auto it = std::upper_bound(ranks.begin(), ranks.end(), j0);
      best = std::max(best, suff[it - ranks.begin()]);
      out[qi] = std::max(out[qi], best);
    }
  }
}

}  // namespace

DominationReport maximal_domination_check(const WaveletBasis& basis, double s) {
  require(s > 0.0 && !std::isinf(s), "exponent must lie in (0, inf)");
  const DyadicSystem& cubes = basis.cubes();
  DominationReport rep;
  rep.worst = std::numeric_limits<double>::infinity();
  std::vector<double> vals;
  for (int i = 0; i < basis.size(); ++i) {
    const auto& it = basis.items()[i];
    const std::vector<int>& w_pts = basis.core(i);
    if (w_pts.empty()) return DominationReport{0.0, i, false};
    const std::vector<int>& queries = cubes.members(it.k, it.alpha);
    indicator_maximal_at(basis.space(), w_pts, queries, vals);
    for (double v : vals) {
      const double lifted = std::pow(v, 1.0 / s);
      if (lifted < rep.worst) {
        rep.worst = lifted;
        rep.worst_item = i;
      }
    }
  }
  if (basis.size() == 0) rep.worst = 0.0;
  rep.ok = rep.worst > 0.0 && std::isfinite(rep.worst);
  return rep;
}

EquivalenceBand norm_equivalence_band(const WaveletBasis& basis, int family,
                                      std::uint64_t seed) {
  require(family >= 1, "need at least one test function");
  const MetricMeasureSpace& space = basis.space();
  const int n = space.size();
  Rng rng(seed);
  EquivalenceBand band;
  band.lo35 = band.lo45 = std::numeric_limits<double>::infinity();

  const double r_lo = std::log(2.0 * space.min_gap());
  const double r_hi = std::log(space.diameter() / 2.0);
  int attempts = 0;
  while (band.family < family && attempts < family * 200) {
    ++attempts;
    const int center = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const double radius = std::exp(rng.uniform(r_lo, r_hi));
    const std::uint64_t sub = rng.next_u64();
    if (space.ball_points(center, radius).size() < 2) continue;
    const Atom atom = make_atom(space, {center, radius}, 2.0, sub);
    const CoefficientField c = analyze(basis, atom.values);
    const double ew = c.wavelet.squaredNorm();
    const double ec = c.coarse.squaredNorm();
    if (ew <= 0.0) continue;
    band.max_coarse_frac = std::max(band.max_coarse_frac, ec / (ec + ew));
    const double n3 = norm_iii(basis, c.wavelet);
    const double n4 = norm_iv(basis, c.wavelet);
    const double n5 = norm_v(basis, c.wavelet);
    if (n5 <= 0.0) continue;
    band.lo35 = std::min(band.lo35, n3 / n5);
    band.hi35 = std::max(band.hi35, n3 / n5);
    band.lo45 = std::min(band.lo45, n4 / n5);
    band.hi45 = std::max(band.hi45, n4 / n5);
    ++band.family;
  }
  require(band.family == family, "could not draw enough admissible test atoms");
  return band;
}

MaximalComparison compare_maximals(const DyadicSystem& cubes, const Eigen::VectorXd& f) {
  const MetricMeasureSpace& space = cubes.space();
  const Eigen::VectorXd mdy = dyadic_maximal(cubes, f);
  const Eigen::VectorXd mhl = hl_maximal(space, f);
  MaximalComparison cmp;
  for (int x = 0; x < space.size(); ++x) {
    if (mhl(x) > 0.0 && mdy(x) / mhl(x) > cmp.dy_over_hl) {
      cmp.dy_over_hl = mdy(x) / mhl(x);
      cmp.arg_dy_over_hl = x;
    }
    if (mdy(x) > 0.0 && mhl(x) / mdy(x) > cmp.hl_over_dy) {
      cmp.hl_over_dy = mhl(x) / mdy(x);
      cmp.arg_hl_over_dy = x;
    }
  }
  return cmp;
}

}  // namespace homwave
