#include "homwave/splines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "homwave/rng.hpp"

namespace homwave {

namespace {

using CountMatrix = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic>;

void accumulate_draw(const NetHierarchy& nets, const DyadicSystem& draw,
                     std::vector<CountMatrix>& counts) {
  const int n = nets.space().size();
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    const int l = nets.level_index(k);
    for (int x = 0; x < n; ++x) counts[l](nets.row_of(k, draw.cube_of(k, x)), x) += 1;
  }
}

}  // namespace

SplineSystem estimate_splines(const NetHierarchy& nets, int samples, std::uint64_t seed,
                              int threads) {
  require(samples >= 1, "sample count must be at least 1");
  const auto& space = nets.space();
  const int n = space.size();
  const int levels = nets.level_count();

  auto zero_counts = [&]() {
    std::vector<CountMatrix> c(levels);
    for (int l = 0; l < levels; ++l)
      c[l] = CountMatrix::Zero(static_cast<int>(nets.net(nets.k_min() + l).size()), n);
    return c;
  };

  // Per-thread integer accumulators; integer merges are order-independent,
  // so any worker count yields identical totals.
  const int nt = std::max(1, std::min(threads, samples));
  std::vector<std::vector<CountMatrix>> partial(nt);
  parallel_for(static_cast<std::size_t>(nt), nt, [&](std::size_t t) {
    partial[t] = zero_counts();
    const int lo = static_cast<int>(samples * t / nt);
    const int hi = static_cast<int>(samples * (t + 1) / nt);
    for (int r = lo; r < hi; ++r) {
      const DyadicSystem draw =
          sample_random_system(nets, seed ^ static_cast<std::uint64_t>(r));
      accumulate_draw(nets, draw, partial[t]);
    }
  });
  std::vector<CountMatrix> counts = std::move(partial[0]);
  for (int t = 1; t < nt; ++t)
    for (int l = 0; l < levels; ++l) counts[l] += partial[t][l];

  SplineSystem sys;
  sys.nets = &nets;
  sys.samples = samples;
  sys.seed = seed;
  sys.values.resize(levels);
  sys.mu.resize(levels);
  sys.nu.resize(levels);
  sys.interpolation_exact.assign(levels, 1);
  for (int l = 0; l < levels; ++l) {
    const int k = nets.k_min() + l;
    const auto& net = nets.net(k);
    const int m = static_cast<int>(net.size());
    sys.values[l] = counts[l].cast<double>() / static_cast<double>(samples);
    sys.mu[l].resize(m);
    for (int r = 0; r < m; ++r) sys.mu[l](r) = space.volume(net[r], nets.scale(k));
    sys.nu[l] = sys.values[l] * space.weights();
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c)
        if (sys.values[l](r, net[c]) != (r == c ? 1.0 : 0.0)) sys.interpolation_exact[l] = 0;
  }
  sys.p_coeffs.resize(std::max(0, levels - 1));
  sys.refinement_residual.assign(std::max(0, levels - 1), 0.0);
  sys.refinement_degraded.assign(std::max(0, levels - 1), 0);
  for (int k = nets.k_min(); k < nets.k_max(); ++k) {
    auto rc = refinement_coefficients(sys, k);
    const int t = nets.level_index(k);
    sys.p_coeffs[t] = std::move(rc.p);
    sys.refinement_residual[t] = rc.residual;
    sys.refinement_degraded[t] = rc.degraded ? 1 : 0;
  }
  const auto reg = verify_spline_regularity(sys, 60000);
  sys.eta_est.resize(levels);
  for (int l = 0; l < levels; ++l) sys.eta_est[l] = reg.levels[l].eta_est;
  return sys;
}

RefinementCoefficients refinement_coefficients(const SplineSystem& splines, int k) {
  const auto& nets = *splines.nets;
  require(k >= nets.k_min() && k < nets.k_max(), "no transition at this level");
  const auto& space = nets.space();
  const int l = nets.level_index(k);
  const auto& fine = nets.net(k + 1);
  const int m = static_cast<int>(nets.net(k).size());
  const int mf = static_cast<int>(fine.size());

  RefinementCoefficients rc;
  if (splines.interpolation_exact[l + 1]) {
    rc.p.resize(m, mf);
    for (int c = 0; c < mf; ++c) rc.p.col(c) = splines.values[l].col(fine[c]);
  } else {
    // Interpolation at the finer level failed: fall back to the weighted
    // least-squares fit of each coarse spline against the finer family.
    rc.degraded = true;
    const Eigen::MatrixXd& sf = splines.values[l + 1];
    const Eigen::MatrixXd sfw = sf * space.weights().asDiagonal();
    const Eigen::MatrixXd gram = sfw * sf.transpose();
    const Eigen::MatrixXd rhs = sfw * splines.values[l].transpose();  // mf x m
    rc.p = gram.ldlt().solve(rhs).transpose();
  }
  rc.residual = (splines.values[l] - rc.p * splines.values[l + 1]).cwiseAbs().maxCoeff();
  return rc;
}

SupportReport spline_support(const SplineSystem& splines) {
  const auto& nets = *splines.nets;
  const auto& space = nets.space();
  const int n = space.size();
  SupportReport rep;
  rep.r_in = std::numeric_limits<double>::infinity();
  rep.r_out = 0.0;
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    const int l = nets.level_index(k);
    const double sc = nets.scale(k);
    double rin = std::numeric_limits<double>::infinity();
    double rout = 0.0;
    const auto& net = nets.net(k);
    for (int r = 0; r < static_cast<int>(net.size()); ++r) {
      const int a = net[r];
      for (int j = 0; j < n; ++j) {
        const int x = space.neighbor_order(a)[j];
        if (splines.values[l](r, x) < 1.0) {
          // Shrink just below the first violating distance so the open ball
          // of radius rin * delta^k stays inside the s = 1 region even after
          // the ratio is multiplied back by delta^k downstream.
          rin = std::min(rin, space.sorted_dist(a, j) * (1.0 - 1e-12) / sc);
          break;
        }
      }
      double rout_a = 0.0;
      for (int x = 0; x < n; ++x)
        if (splines.values[l](r, x) > 0.0)
          rout_a = std::max(rout_a, space.dist(a, x) * (1.0 + 1e-12));
      // A spline supported only at its center still needs a positive radius
      // for the open support ball to hold the center.
      if (rout_a == 0.0)
        rout_a = n > 1 ? 0.5 * std::min(sc, space.sorted_dist(a, 1)) : 8.0 * sc;
      rout = std::max(rout, rout_a / sc);
    }
    if (!std::isfinite(rin)) rin = 8.0;  // spline is identically 1
    rep.r_in_level.push_back(rin);
    rep.r_out_level.push_back(rout);
    rep.r_in = std::min(rep.r_in, rin);
    rep.r_out = std::max(rep.r_out, rout);
  }
  return rep;
}

RegularityReport verify_spline_regularity(const SplineSystem& splines,
                                          long pair_budget_per_level) {
  const auto& nets = *splines.nets;
  const auto& space = nets.space();
  const int n = space.size();
  RegularityReport rep;
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    const int l = nets.level_index(k);
    const double sc = nets.scale(k);
    RegularityLevel lvl;
    lvl.k = k;
    lvl.resolved = sc >= 4.0 * space.min_gap();
    const auto& mat = splines.values[l];
    lvl.indicator_like = true;
    for (int r = 0; r < mat.rows() && lvl.indicator_like; ++r)
      for (int c = 0; c < mat.cols(); ++c) {
        const double v = mat(r, c);
        if (v != 0.0 && v != 1.0) {
          lvl.indicator_like = false;
          break;
        }
      }

    const auto& net = nets.net(k);
    // Deterministic subsample of pairs (u near a, v near u, d(u,v) <= sc).
    std::vector<std::pair<double, double>> samples;  // (log d/sc, log |ds|)
    const long per_alpha = std::max<long>(64, pair_budget_per_level / std::max<std::size_t>(1, net.size()));
    for (int r = 0; r < static_cast<int>(net.size()); ++r) {
      const int a = net[r];
      const auto us = space.ball_points(a, 6.0 * sc);
      const auto su = static_cast<std::size_t>(
          std::max<long>(1, static_cast<long>(us.size()) * 8 / per_alpha));
      for (std::size_t iu = 0; iu < us.size(); iu += su) {
        const int u = us[iu];
        const auto vs = space.ball_points(u, sc);
        const auto sv = std::max<std::size_t>(1, vs.size() / 8);
        for (std::size_t iv = 0; iv < vs.size(); iv += sv) {
          const int v = vs[iv];
          const double d = space.dist(u, v);
          if (d <= 0.0) continue;
          const double ds = std::abs(mat(r, u) - mat(r, v));
          if (ds <= 0.0) continue;
          samples.emplace_back(std::log(d / sc), std::log(ds));
        }
      }
    }
    lvl.usable_pairs = static_cast<long>(samples.size());
    if (samples.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (auto [x, y] : samples) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      const double m = static_cast<double>(samples.size());
      const double denom = m * sxx - sx * sx;
      lvl.eta_est = denom > 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
      double cmax = 0.0;
      for (auto [x, y] : samples) cmax = std::max(cmax, std::exp(y - lvl.eta_est * x));
      lvl.C_est = cmax;
    }
    rep.levels.push_back(lvl);
  }
  return rep;
}

std::vector<RieszBandLevel> riesz_band(const SplineSystem& splines, int trials,
                                       std::uint64_t seed) {
  const auto& nets = *splines.nets;
  const auto& space = nets.space();
  std::vector<RieszBandLevel> out;
  Rng rng(seed);
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    const int l = nets.level_index(k);
    const int m = static_cast<int>(nets.net(k).size());
    RieszBandLevel band;
    band.k = k;
    band.r_min = std::numeric_limits<double>::infinity();
    band.r_max = 0.0;
    for (int t = 0; t < trials; ++t) {
      Eigen::VectorXd lambda(m);
      for (int r = 0; r < m; ++r) lambda(r) = rng.normal();
      const Eigen::VectorXd f = splines.values[l].transpose() * lambda;
      const double num = std::sqrt((f.array().square() * space.weights().array()).sum());
      const double den = std::sqrt((lambda.array().square() * splines.nu[l].array()).sum());
      if (den <= 0.0) continue;
      const double ratio = num / den;
      band.r_min = std::min(band.r_min, ratio);
      band.r_max = std::max(band.r_max, ratio);
    }
    if (!std::isfinite(band.r_min)) band.r_min = 0.0;
    out.push_back(band);
  }
  return out;
}

}  // namespace homwave
