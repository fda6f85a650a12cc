#include "homwave/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "homwave/io.hpp"
#include "homwave/rng.hpp"
#include "json.hpp"

namespace homwave {

namespace {

using ordered_json = nlohmann::ordered_json;

SpaceFormat parse_format(const std::string& f) {
  if (f == "coords") return SpaceFormat::coords;
  if (f == "matrix") return SpaceFormat::matrix;
  if (f == "graph") return SpaceFormat::graph;
  throw Error("unknown space format: " + f);
}

std::string out_path(const RunConfig& c, const std::string& name) {
  return (std::filesystem::path(c.out_dir) / name).string();
}

Eigen::VectorXd seeded_normal(int n, Rng& rng) {
  Eigen::VectorXd f(n);
  for (int i = 0; i < n; ++i) f(i) = rng.normal();
  return f;
}

/// Random open ball holding at least two points; radius log-uniform between
/// twice the smallest gap and three quarters of the diameter.
Ball random_ball(const MetricMeasureSpace& space, Rng& rng) {
  const int n = space.size();
  require(n >= 2, "need at least two points to draw a ball");
  const double rlo = 2.0 * space.min_gap();
  const double rhi = std::max(space.diameter() * 0.75, 2.0 * rlo);
  for (int t = 0; t < 4000; ++t) {
    const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const double r = std::exp(rng.uniform(std::log(rlo), std::log(rhi)));
    if (space.ball_points(c, r).size() >= 2) return Ball{c, r};
  }
  throw Error("could not draw a ball containing two points");
}

Workspace build_stages(const RunConfig& config, bool with_basis) {
  config.validate();
  Workspace ws;
  ws.config = config;
  LoadOptions opt;
  opt.snowflake_eps = config.snowflake_eps;
  opt.weights_path = config.weights_path;
  opt.threads = config.threads;
  ws.space = std::make_unique<MetricMeasureSpace>(
      load_space(config.space_path, parse_format(config.format), opt));
  ws.profile = doubling_profile(*ws.space, config.profile_samples,
                                config.seed_experiments);
  ws.nets = std::make_unique<NetHierarchy>(
      build_nets(*ws.space, config.delta, config.k_min, config.k_max));
  ws.cubes = std::make_unique<DyadicSystem>(
      build_cubes(*ws.nets, assign_parents(*ws.nets, ParentMode::nearest)));
  ws.splines = std::make_unique<SplineSystem>(estimate_splines(
      *ws.nets, config.mc_samples, config.seed_splines, config.threads));
  if (with_basis)
    ws.basis = std::make_unique<WaveletBasis>(
        build_wavelets(*ws.splines, *ws.cubes, config.tol_invsqrt));
  return ws;
}

// ---------------------------------------------------------------------------
// verify sections

void check_space(const Workspace& ws, Report& rep) {
  const auto& sp = *ws.space;
  rep.add_pass("space.load", "space-valid-metric-measure", true,
               {{"points", static_cast<double>(sp.size())},
                {"total_mass", sp.total_mass()},
                {"diameter", sp.diameter()},
                {"min_gap", sp.min_gap()}});
  const auto& pr = ws.profile;
  rep.add_info("space.doubling_profile", "volume-doubling-envelope",
               {{"C_dbl", pr.C_dbl},
                {"n", pr.n},
                {"n0_est", pr.n0_est},
                {"N0_est", pr.N0_est},
                {"G0_est", pr.G0_est},
                {"samples", static_cast<double>(pr.samples)},
                {"r_lo", pr.r_lo},
                {"r_hi", pr.r_hi}});
  bool ok = false;
  const double worst = doubling_envelope_recheck(
      sp, pr, ws.config.recheck_samples, ws.config.seed_experiments ^ 0xf4e5,
      ws.config.recheck_slack, &ok);
  rep.add_pass("space.doubling_recheck", "volume-doubling-envelope", ok,
               {{"worst_ratio", worst}, {"slack", ws.config.recheck_slack}},
               "fresh samples against the stored envelope");
}

void check_lattice(const Workspace& ws, Report& rep) {
  const auto& nets = *ws.nets;
  const auto& sp = *ws.space;
  const int n = sp.size();

  double min_sep = std::numeric_limits<double>::infinity();
  double max_cover = 0.0;
  bool nested = true;
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    const double sc = nets.scale(k);
    const auto& net = nets.net(k);
    for (std::size_t i = 0; i < net.size(); ++i)
      for (std::size_t j = i + 1; j < net.size(); ++j)
        min_sep = std::min(min_sep, sp.dist(net[i], net[j]) / sc);
    for (int x = 0; x < n; ++x) {
      double d = std::numeric_limits<double>::infinity();
      for (int a : net) d = std::min(d, sp.dist(x, a));
      max_cover = std::max(max_cover, d / sc);
    }
    if (k < nets.k_max())
      for (int a : net) nested = nested && nets.in_net(k + 1, a);
  }
  if (!std::isfinite(min_sep)) min_sep = std::numeric_limits<double>::max();
  rep.add_pass("lattice.nets", "nested-separated-nets",
               nested && min_sep >= 1.0 && max_cover < 2.0,
               {{"min_separation_ratio", std::min(min_sep, 1e300)},
                {"max_cover_ratio", max_cover},
                {"levels", static_cast<double>(nets.level_count())},
                {"coarsest", static_cast<double>(nets.net(nets.k_min()).size())},
                {"finest", static_cast<double>(nets.net(nets.k_max()).size())}});

  const CubeAxiomReport ax = verify_cube_axioms(*ws.cubes);
  rep.add_pass("lattice.cube_axioms", "dyadic-cube-axioms",
               ax.nesting_ok && ax.partition_ok && ax.ball_containment_ok &&
                   ax.parent_proximity_ok && ax.net_points_own_cube_ok,
               {{"nesting", ax.nesting_ok ? 1.0 : 0.0},
                {"partition", ax.partition_ok ? 1.0 : 0.0},
                {"ball_containment", ax.ball_containment_ok ? 1.0 : 0.0},
                {"parent_proximity", ax.parent_proximity_ok ? 1.0 : 0.0},
                {"net_points_own_cube", ax.net_points_own_cube_ok ? 1.0 : 0.0},
                {"max_children", static_cast<double>(ax.max_children)}});
  if (ws.config.strict_delta) {
    rep.add_pass("lattice.cube_sandwich", "cube-inner-outer-ball-sandwich",
                 ax.sandwich_ok && ax.inner_ratio >= 1.0 / 3.0 &&
                     ax.outer_ratio <= 4.0,
                 {{"inner_ratio", ax.inner_ratio},
                  {"outer_ratio", ax.outer_ratio}},
                 "strict mode: inner >= 1/3, outer <= 4");
  } else {
    rep.add_info("lattice.cube_sandwich", "cube-inner-outer-ball-sandwich",
                 {{"inner_ratio", ax.inner_ratio},
                  {"outer_ratio", ax.outer_ratio}},
                 "measured only; bounds asserted in strict mode");
  }

  const DyadicSystem d1 = sample_random_system(nets, ws.config.seed_lattice);
  const DyadicSystem d2 = sample_random_system(nets, ws.config.seed_lattice);
  const bool repeat_ok = cubes_to_json(d1) == cubes_to_json(d2);
  // The forced-closest rule is part of the finest-level assignment; coarser
  // membership follows the parent chain, which does not imply the analogous
  // statement at coarse levels.
  bool forced_ok = true;
  {
    const int K = nets.k_max();
    const double third = nets.scale(K) / 3.0;
    for (int x = 0; x < n && forced_ok; ++x)
      for (int a : nets.net(K))
        if (sp.dist(x, a) < third && d1.cube_of(K, x) != a) {
          forced_ok = false;
          break;
        }
  }
  rep.add_pass("lattice.random_draw", "random-dyadic-family-rules",
               repeat_ok && forced_ok,
               {{"repeat_identical", repeat_ok ? 1.0 : 0.0},
                {"forced_closest", forced_ok ? 1.0 : 0.0}},
               "same seed twice, and the finest-level forced-closest rule");

  const int k_mid = nets.k_min() + nets.level_count() / 2;
  const SeparatedSumReport ss = separated_sum_check(nets, k_mid, 1.0);
  rep.add_pass("lattice.separated_sum", "separated-sum-finite",
               std::isfinite(ss.sup),
               {{"sup", ss.sup},
                {"arg_point", static_cast<double>(ss.arg_point)},
                {"k", static_cast<double>(k_mid)}});

  const std::string text = cubes_to_json(*ws.cubes);
  const DyadicSystem back = cubes_from_json(nets, text);
  rep.add_pass("lattice.cube_roundtrip", "cube-serialization-roundtrip",
               cubes_to_json(back) == text,
               {{"bytes", static_cast<double>(text.size())}});

  if (static_cast<int>(nets.net(nets.k_max()).size()) == n) {
    Rng rng = Rng::derived(ws.config.seed_experiments, 0x1eb);
    const Eigen::VectorXd f = seeded_normal(n, rng);
    const int K = nets.k_max();
    bool singleton = true;
    double dev = 0.0;
    for (int x = 0; x < n; ++x) {
      const int a = ws.cubes->cube_of(K, x);
      const auto& mem = ws.cubes->members(K, a);
      singleton = singleton && mem.size() == 1 && mem[0] == x;
      double s = 0.0, m = 0.0;
      for (int y : mem) {
        s += sp.weight(y) * f(y);
        m += sp.weight(y);
      }
      dev = std::max(dev, std::abs(s / m - f(x)));
    }
    const double scale = f.cwiseAbs().maxCoeff();
    rep.add_pass("lattice.finest_average", "finest-cube-average-identity",
                 singleton && dev <= 1e-12 * scale,
                 {{"dev", dev}, {"singleton", singleton ? 1.0 : 0.0}},
                 "finest net covers the cloud, cubes are singletons");
  } else {
    rep.add_info("lattice.finest_average", "finest-cube-average-identity", {},
                 "finest net does not cover the whole cloud; identity not applicable");
  }
}

void check_splines(const Workspace& ws, Report& rep) {
  const auto& s = *ws.splines;
  const auto& nets = *ws.nets;
  const auto& sp = *ws.space;
  const int L = nets.level_count();

  double vmin = 1.0, vmax = 0.0, pou_dev = 0.0;
  for (int l = 0; l < L; ++l) {
    vmin = std::min(vmin, s.values[l].minCoeff());
    vmax = std::max(vmax, s.values[l].maxCoeff());
    pou_dev = std::max(
        pou_dev,
        (s.values[l].colwise().sum().array() - 1.0).abs().maxCoeff());
  }
  rep.add_pass("splines.range", "spline-values-in-unit-interval",
               vmin >= 0.0 && vmax <= 1.0, {{"min", vmin}, {"max", vmax}});
  rep.add_pass("splines.partition", "spline-partition-of-unity",
               pou_dev <= ws.config.tol_exact,
               {{"dev", pou_dev}, {"tol", ws.config.tol_exact}});

  int exact_levels = 0;
  for (char c : s.interpolation_exact) exact_levels += c ? 1 : 0;
  rep.add_pass("splines.interpolation", "spline-interpolation-identity",
               exact_levels == L,
               {{"exact_levels", static_cast<double>(exact_levels)},
                {"levels", static_cast<double>(L)}});

  const double rbound = 2.0 / std::sqrt(static_cast<double>(s.samples));
  double rmax = 0.0;
  bool degraded = false;
  std::map<std::string, double> rvals{{"bound", rbound}};
  for (std::size_t t = 0; t < s.refinement_residual.size(); ++t) {
    rmax = std::max(rmax, s.refinement_residual[t]);
    degraded = degraded || s.refinement_degraded[t];
    rvals["t" + std::to_string(t)] = s.refinement_residual[t];
  }
  rvals["max"] = rmax;
  rep.add_pass("splines.refinement", "two-scale-refinement-residual",
               rmax <= rbound && !degraded, rvals,
               degraded ? "least-squares fallback was needed" : "");

  const SupportReport sup = spline_support(s);
  if (ws.config.strict_delta) {
    rep.add_pass("splines.support", "spline-support-radii",
                 sup.r_in >= 0.125 && sup.r_out <= 8.0,
                 {{"r_in", sup.r_in}, {"r_out", sup.r_out}},
                 "strict mode: r_in >= 1/8 and r_out <= 8");
  } else {
    rep.add_info("splines.support", "spline-support-radii",
                 {{"r_in", sup.r_in}, {"r_out", sup.r_out}},
                 "measured only; bounds asserted in strict mode");
  }

  bool nu_ok = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  const double slack = 1e-12 * sp.total_mass();
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    const int l = nets.level_index(k);
    const double sc = nets.scale(k);
    const auto& net = nets.net(k);
    for (std::size_t r = 0; r < net.size(); ++r) {
      const double lo = sp.volume(net[r], sup.r_in_level[static_cast<std::size_t>(l)] * sc);
      const double hi = sp.volume(net[r], sup.r_out_level[static_cast<std::size_t>(l)] * sc);
      const double nu = s.nu[static_cast<std::size_t>(l)](static_cast<Eigen::Index>(r));
      nu_ok = nu_ok && nu >= lo - slack && nu <= hi + slack;
      worst_margin = std::min({worst_margin, nu - lo, hi - nu});
    }
  }
  rep.add_pass("splines.mass_bounds", "spline-mass-vs-ball-volume", nu_ok,
               {{"worst_margin", worst_margin}},
               "integral of each spline bracketed by support ball volumes");

  const RegularityReport reg = verify_spline_regularity(s);
  bool reg_ok = true;
  int fitted = 0;
  std::map<std::string, double> regv;
  for (const auto& lev : reg.levels) {
    const std::string tag = "l" + std::to_string(nets.level_index(lev.k));
    regv[tag + "_eta"] = lev.eta_est;
    regv[tag + "_pairs"] = static_cast<double>(lev.usable_pairs);
    if (lev.usable_pairs >= 50 && !lev.indicator_like && lev.resolved) {
      ++fitted;
      reg_ok = reg_ok && std::isfinite(lev.eta_est) && lev.eta_est > 0.0;
    }
  }
  regv["fitted_levels"] = static_cast<double>(fitted);
  rep.add_pass("splines.regularity", "spline-hoelder-regularity", reg_ok, regv,
               fitted == 0 ? "no level had 50 usable pairs" : "");

  const auto riesz = riesz_band(s, 24, ws.config.seed_experiments ^ 0x41e);
  bool riesz_ok = true;
  std::map<std::string, double> rz;
  for (const auto& lev : riesz) {
    const std::string tag = "l" + std::to_string(nets.level_index(lev.k));
    rz[tag + "_min"] = lev.r_min;
    rz[tag + "_max"] = lev.r_max;
    riesz_ok = riesz_ok && lev.r_min > 0.0 && std::isfinite(lev.r_max);
  }
  rep.add_pass("splines.riesz", "spline-riesz-band", riesz_ok, rz,
               "L2 ratio band of random spline combinations");

  if (ws.basis) {
    std::map<std::string, double> lg;
    double gmax = 0.0;
    for (std::size_t l = 0; l < ws.basis->ladder_gap().size(); ++l) {
      lg["l" + std::to_string(l)] = ws.basis->ladder_gap()[l];
      gmax = std::max(gmax, ws.basis->ladder_gap()[l]);
    }
    lg["max"] = gmax;
    rep.add_info("splines.ladder_gap", "refinement-consistent-ladder", lg,
                 "sup distance between raw splines and the nested ladder the "
                 "basis is built on");
  }
}

void check_wavelets(const Workspace& ws, Report& rep) {
  const auto& basis = *ws.basis;
  const auto& cfg = ws.config;

  bool gram_ok = !basis.flagged();
  std::map<std::string, double> gv;
  for (const auto& g : basis.gram_info()) {
    if (g.Mtilde.rows() == 0) continue;
    const std::string tag = "t" + std::to_string(ws.nets->level_index(g.k));
    gv[tag + "_min_eig"] = g.mt_min_eig;
    gv[tag + "_max_eig"] = g.mt_max_eig;
    gv[tag + "_discrepancy"] = g.projection_discrepancy;
    gram_ok = gram_ok && g.mt_min_eig > 0.0 && !g.ill_conditioned;
  }
  std::string gnote;
  for (int k : basis.excluded_levels())
    gnote += (gnote.empty() ? "excluded levels:" : ",") + std::string(" ") +
             std::to_string(k);
  rep.add_pass("wavelets.gram", "projected-gram-positive-definite", gram_ok,
               gv, gnote);

  const ExactnessReport ex =
      verify_exactness(basis, 8, cfg.seed_experiments ^ 0xe5a);
  rep.add_pass(
      "wavelets.exactness", "wavelet-orthonormal-basis",
      ex.orthonormality_dev <= cfg.tol_basis &&
          ex.cancellation_dev <= cfg.tol_basis &&
          ex.roundtrip_dev <= cfg.tol_basis &&
          ex.plancherel_dev <= cfg.tol_basis && ex.dimension_ok &&
          !basis.flagged(),
      {{"orthonormality", ex.orthonormality_dev},
       {"cancellation", ex.cancellation_dev},
       {"roundtrip", ex.roundtrip_dev},
       {"plancherel", ex.plancherel_dev},
       {"dimension_ok", ex.dimension_ok ? 1.0 : 0.0},
       {"wavelets", static_cast<double>(basis.size())},
       {"coarse", static_cast<double>(basis.coarse_alphas().size())},
       {"tol", cfg.tol_basis}});

  bool cross_ok = true;
  int tested = 0, skipped = 0;
  double cross_max = 0.0;
  std::map<std::string, double> cv;
  for (const auto& g : basis.gram_info()) {
    if (g.Mtilde.rows() == 0 || g.ill_conditioned || g.mt_min_eig <= 0.0)
      continue;
    if (g.Mtilde.rows() > cfg.neumann_max_dim) {
      ++skipped;
      continue;
    }
    const Eigen::MatrixXd a =
        inv_sqrt(g.Mtilde, InvSqrtMethod::eig, cfg.tol_invsqrt);
    const Eigen::MatrixXd b =
        inv_sqrt(g.Mtilde, InvSqrtMethod::neumann, cfg.tol_invsqrt);
    const double dev = (a - b).cwiseAbs().maxCoeff();
    cv["t" + std::to_string(ws.nets->level_index(g.k))] = dev;
    cross_max = std::max(cross_max, dev);
    cross_ok = cross_ok && dev <= cfg.tol_cross;
    ++tested;
  }
  cv["max"] = cross_max;
  cv["tested"] = static_cast<double>(tested);
  cv["skipped"] = static_cast<double>(skipped);
  rep.add_pass("wavelets.inv_sqrt_cross", "inverse-sqrt-dual-route", cross_ok,
               cv,
               skipped > 0 ? "levels above neumann_max_dim were skipped"
                           : "spectral and series routes agree");

  const auto coeff = neumann_coefficients(65);
  double cdev = 0.0;
  for (int i = 0; i <= 64; ++i) {
    const double closed =
        std::exp(std::lgamma(2.0 * i + 1.0) - 2.0 * std::lgamma(i + 1.0) -
                 i * std::log(4.0));
    cdev = std::max(cdev, std::abs(coeff[static_cast<std::size_t>(i)] - closed));
  }
  rep.add_pass("wavelets.series_coefficients", "binomial-series-coefficients",
               cdev <= 1e-12, {{"max_dev", cdev}});

  const DecayReport dec = verify_decay(basis);
  rep.add_pass("wavelets.decay", "wavelet-exponential-decay",
               dec.nu_fit > 0.0 && std::isfinite(dec.C_fit) &&
                   dec.violations == 0,
               {{"C_fit", dec.C_fit},
                {"nu_fit", dec.nu_fit},
                {"violations", static_cast<double>(dec.violations)},
                {"samples", static_cast<double>(dec.samples)},
                {"holder_eta", dec.holder_eta},
                {"holder_pairs", static_cast<double>(dec.holder_pairs)}},
               "normalized profile against distance in units of delta^k");

  const LowerBoundReport lb = verify_lower_bound(basis);
  rep.add_pass("wavelets.lower_bound", "core-ball-lower-bound",
               lb.feasible && lb.c_lower > 0.0 && lb.c3_min > 0.0,
               {{"eps0", lb.eps0},
                {"c_lower", lb.c_lower},
                {"c3_min", lb.c3_min},
                {"min_ratio", lb.min_ratio}},
               "uniform floor of |psi| sqrt(mu(Q)) on core balls");
}

void check_hardy(const Workspace& ws, Report& rep) {
  const auto& basis = *ws.basis;
  const auto& sp = *ws.space;
  const auto& cfg = ws.config;
  const int n = sp.size();
  const int m = basis.size();

  {
    Rng rng = Rng::derived(cfg.seed_experiments, 0xa70);
    int passed = 0;
    double max_excess = 0.0;
    for (int i = 0; i < cfg.atom_count; ++i) {
      const Ball ball = random_ball(sp, rng);
      const double q = (i % 2 == 0) ? 2.0 : std::numeric_limits<double>::infinity();
      const Atom atom = make_atom(sp, ball, q, rng.next_u64());
      const AtomReport ar = validate_atom(sp, atom.values, atom.ball, atom.q);
      if (ar.ok()) ++passed;
      if (ar.bound > 0.0) max_excess = std::max(max_excess, ar.lq / ar.bound);
    }
    rep.add_pass("hardy.atoms", "atom-normalization",
                 passed == cfg.atom_count,
                 {{"passed", static_cast<double>(passed)},
                  {"count", static_cast<double>(cfg.atom_count)},
                  {"max_norm_fraction", max_excess}},
                 "support, saturated norm bound, vanishing mean");
  }

  {
    Rng rng = Rng::derived(cfg.seed_experiments, 0x301e);
    int passed = 0, count = std::min(cfg.molecule_count, m);
    double max_eta_sum = 0.0, max_excess = 0.0;
    for (int i = 0; i < count; ++i) {
      const int idx = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
      const auto& item = basis.items()[static_cast<std::size_t>(idx)];
      const double sc = ws.nets->scale(item.k);
      const double vol = sp.volume(item.beta, sc);
      const Eigen::VectorXd mol =
          basis.wavelet_values().col(idx) / std::sqrt(vol);
      const MoleculeReport mr =
          validate_molecule(sp, mol, Ball{item.beta, sc}, 2.0);
      if (mr.ok()) ++passed;
      max_eta_sum = std::max(max_eta_sum, mr.eta_weighted_sum);
      if (mr.bound > 0.0) max_excess = std::max(max_excess, mr.excess);
    }
    rep.add_pass("hardy.molecules", "normalized-wavelets-are-molecules",
                 passed == count,
                 {{"passed", static_cast<double>(passed)},
                  {"count", static_cast<double>(count)},
                  {"max_eta_weighted_sum", max_eta_sum},
                  {"max_norm_fraction", max_excess}},
                 "wavelets scaled by V(beta, delta^k)^{-1/2}");
  }

  {
    Rng rng = Rng::derived(cfg.seed_experiments, 0x6f01);
    double hdev = 0.0, tdev = 0.0;
    const double c = 2.375;
    for (int t = 0; t < 5; ++t) {
      const Eigen::VectorXd a = seeded_normal(m, rng);
      const Eigen::VectorXd b = seeded_normal(m, rng);
      for (int which = 0; which < 3; ++which) {
        auto fn = which == 0 ? norm_iii : (which == 1 ? norm_iv : norm_v);
        const double na = fn(basis, a), nb = fn(basis, b);
        const double nh = fn(basis, c * a), nc = fn(basis, a + b);
        hdev = std::max(hdev, std::abs(nh - c * na) / std::max(na, 1e-300));
        tdev = std::max(tdev,
                        (nc - na - nb) / std::max(na + nb, 1e-300));
      }
    }
    rep.add_pass("hardy.norm_axioms", "square-function-norm-axioms",
                 hdev <= 1e-12 && tdev <= 1e-12,
                 {{"homogeneity_dev", hdev}, {"triangle_excess", tdev}},
                 "homogeneity and triangle inequality on random fields");
  }

  {
    const EquivalenceBand band = norm_equivalence_band(
        basis, cfg.equivalence_family, cfg.seed_experiments ^ 0xe91b);
    rep.add_info("hardy.norm_bands", "square-function-norm-bands",
                 {{"lo35", band.lo35},
                  {"hi35", band.hi35},
                  {"lo45", band.lo45},
                  {"hi45", band.hi45},
                  {"max_coarse_frac", band.max_coarse_frac},
                  {"family", static_cast<double>(band.family)}},
                 "ratio bands of the three norms over random atoms");
  }

  {
    Rng rng = Rng::derived(cfg.seed_experiments, 0xdec0);
    bool parts = true;
    double max_res = 0.0, ratio_min = std::numeric_limits<double>::infinity();
    double ratio_max = 0.0, mol_excess = 0.0;
    int used = 0;
    for (int i = 0; i < cfg.decompose_count; ++i) {
      const Ball ball = random_ball(sp, rng);
      const Atom atom = make_atom(sp, ball, 2.0, rng.next_u64());
      const Eigen::VectorXd coeffs = analyze(basis, atom.values).wavelet;
      const AtomicDecomposition d = decompose(basis, coeffs);
      parts = parts && d.partition_ok;
      max_res = std::max(max_res, d.resynthesis_dev);
      if (d.phi_l1 > 0.0) {
        const double ratio = d.total_lambda / d.phi_l1;
        ratio_min = std::min(ratio_min, ratio);
        ratio_max = std::max(ratio_max, ratio);
        ++used;
      }
      for (const auto& p : d.pieces) {
        const MoleculeReport mr =
            validate_molecule(sp, p.molecule, p.ball, 2.0);
        if (mr.bound > 0.0) mol_excess = std::max(mol_excess, mr.excess);
      }
    }
    if (used == 0) ratio_min = 0.0;
    rep.add_pass("hardy.decompose", "atomic-decomposition-exactness",
                 parts && max_res <= cfg.tol_basis,
                 {{"max_resynthesis", max_res},
                  {"partition", parts ? 1.0 : 0.0},
                  {"lambda_ratio_min", ratio_min},
                  {"lambda_ratio_max", ratio_max},
                  {"molecule_norm_factor", mol_excess},
                  {"atoms", static_cast<double>(cfg.decompose_count)}},
                 "index partition and resynthesis of stopping-time pieces");
  }

  {
    bool all_ok = true;
    double max_ratio = 0.0;
    int rows = 0;
    for (int fi = 0; fi < cfg.weak_functions; ++fi) {
      Rng rng = Rng::derived(cfg.seed_experiments, 0x3d00 + static_cast<std::uint64_t>(fi));
      const Eigen::VectorXd f = seeded_normal(n, rng);
      const Eigen::VectorXd md = dyadic_maximal(*ws.cubes, f);
      const double top = md.maxCoeff();
      if (top <= 0.0) continue;
      std::vector<double> lambdas;
      const int J = cfg.weak_thresholds;
      for (int j = 0; j < J; ++j)
        lambdas.push_back(top * 0.999 *
                          std::pow(10.0, -3.0 * (J - 1 - j) / std::max(J - 1, 1)));
      const Weak11Report w = weak11_check(*ws.cubes, f, lambdas);
      all_ok = all_ok && w.ok;
      max_ratio = std::max(max_ratio, w.max_ratio);
      rows += static_cast<int>(w.rows.size());
    }
    rep.add_pass("hardy.weak11", "dyadic-maximal-weak-type", all_ok,
                 {{"max_ratio", max_ratio}, {"rows", static_cast<double>(rows)}},
                 "level-set mass bound with constant one, plus disjoint "
                 "maximal-cube structure");
  }

  {
    const int dim = std::max(1, std::min(64, m));
    double a1 = std::numeric_limits<double>::infinity(), b1 = 0.0;
    double a4 = std::numeric_limits<double>::infinity(), b4 = 0.0;
    for (int v = 0; v < cfg.khintchine_vectors; ++v) {
      Rng rng = Rng::derived(cfg.seed_experiments, 0x4b00 + static_cast<std::uint64_t>(v));
      const Eigen::VectorXd lam = seeded_normal(dim, rng);
      const double r1 = khintchine_ratio(lam, cfg.khintchine_trials, 1.0,
                                         cfg.seed_experiments ^ (0x9100 + static_cast<std::uint64_t>(v)));
      const double r4 = khintchine_ratio(lam, cfg.khintchine_trials, 4.0,
                                         cfg.seed_experiments ^ (0x9400 + static_cast<std::uint64_t>(v)));
      a1 = std::min(a1, r1);
      b1 = std::max(b1, r1);
      a4 = std::min(a4, r4);
      b4 = std::max(b4, r4);
    }
    rep.add_info("hardy.khintchine", "khintchine-ratio-band",
                 {{"a1", a1},
                  {"b1", b1},
                  {"a4", a4},
                  {"b4", b4},
                  {"vectors", static_cast<double>(cfg.khintchine_vectors)},
                  {"trials", static_cast<double>(cfg.khintchine_trials)}},
                 "two-sided moment constants over random coefficient vectors");
  }

  {
    Rng rng = Rng::derived(cfg.seed_experiments, 0x51f0);
    double iso = 0.0, worst_ratio = 0.0;
    bool all_ok = true;
    for (int i = 0; i < cfg.sign_fields; ++i) {
      const Ball ball = random_ball(sp, rng);
      const Atom atom = make_atom(sp, ball, 2.0, rng.next_u64());
      const Eigen::VectorXd coeffs = analyze(basis, atom.values).wavelet;
      if (coeffs.norm() == 0.0) continue;
      const SignSynthesisReport sr = square_function_vs_signs(
          basis, coeffs, cfg.sign_trials,
          cfg.seed_experiments ^ (0x7e00 + static_cast<std::uint64_t>(i)),
          cfg.sign_slack);
      iso = std::max(iso, sr.isometry_dev);
      all_ok = all_ok && sr.ok && sr.sampled_max_is_lower_bound;
      if (sr.sampled_max > 0.0)
        worst_ratio = std::max(worst_ratio, sr.lhs / sr.sampled_max);
    }
    rep.add_pass("hardy.sign_isometry", "sign-synthesis-isometry",
                 iso <= cfg.tol_isometry,
                 {{"max_dev", iso}, {"tol", cfg.tol_isometry}},
                 "L2 norm of every sign synthesis equals the coefficient norm");
    rep.add_pass("hardy.sign_square", "square-function-vs-sign-sup", all_ok,
                 {{"worst_ratio", worst_ratio},
                  {"slack", cfg.sign_slack},
                  {"fields", static_cast<double>(cfg.sign_fields)},
                  {"trials", static_cast<double>(cfg.sign_trials)}},
                 "square-function L1 norm against the sampled sign sup; the "
                 "sampled max only underestimates the true sup");
  }

  {
    const CzReport cz =
        cz_kernel_check(basis, {}, cfg.cz_draws, cfg.seed_experiments ^ 0xc2);
    rep.add_pass("hardy.cz_kernel", "cz-kernel-finite-constants", cz.finite,
                 {{"size_const", cz.size_const},
                  {"size_min", cz.size_min},
                  {"size_max", cz.size_max},
                  {"stability_factor", cz.stability_factor},
                  {"holder_exp", cz.holder_exp},
                  {"holder_const", cz.holder_const},
                  {"holder_samples", static_cast<double>(cz.holder_samples)},
                  {"draws", static_cast<double>(cz.draws)}},
                 "only finiteness is asserted; constants are reported");
  }

  {
    const DominationReport dom = maximal_domination_check(basis, cfg.domination_s);
    rep.add_pass("hardy.maximal_domination", "core-indicator-maximal-floor",
                 dom.ok,
                 {{"worst", dom.worst},
                  {"worst_item", static_cast<double>(dom.worst_item)},
                  {"s", cfg.domination_s}},
                 "M(chi_W)^{1/s} stays positive on the whole parent cube");
  }

  {
    Rng rng = Rng::derived(cfg.seed_experiments, 0xcafe);
    const Eigen::VectorXd f = seeded_normal(n, rng);
    const MaximalComparison mc = compare_maximals(*ws.cubes, f);
    rep.add_info("hardy.maximal_compare", "dyadic-vs-ball-maximal",
                 {{"dy_over_hl", mc.dy_over_hl},
                  {"hl_over_dy", mc.hl_over_dy},
                  {"arg_dy_over_hl", static_cast<double>(mc.arg_dy_over_hl)},
                  {"arg_hl_over_dy", static_cast<double>(mc.arg_hl_over_dy)}},
                 "empirical two-sided comparison on a sampled function");
  }
}

}  // namespace

Workspace build_all(const RunConfig& config) {
  return build_stages(config, true);
}

Report run_verify(const Workspace& ws) {
  Report rep;
  rep.space_id = ws.config.space_id;
  rep.config_hash = hash_hex(ws.config.hash());
  check_space(ws, rep);
  check_lattice(ws, rep);
  check_splines(ws, rep);
  check_wavelets(ws, rep);
  check_hardy(ws, rep);
  return rep;
}

// ---------------------------------------------------------------------------
// commands

namespace {

void write_profile(const Workspace& ws, const std::string& path) {
  ordered_json j;
  j["C_dbl"] = ws.profile.C_dbl;
  j["n"] = ws.profile.n;
  j["n0_est"] = ws.profile.n0_est;
  j["N0_est"] = ws.profile.N0_est;
  j["G0_est"] = ws.profile.G0_est;
  j["samples"] = ws.profile.samples;
  j["r_lo"] = ws.profile.r_lo;
  j["r_hi"] = ws.profile.r_hi;
  write_text_file(path, j.dump(2) + "\n");
}

void write_spline_artifacts(const Workspace& ws) {
  const auto& s = *ws.splines;
  const auto& nets = *ws.nets;
  const auto& c = ws.config;
  const int n = ws.space->size();

  Eigen::Index rows = 0;
  for (const auto& v : s.values) rows += v.rows();
  Eigen::MatrixXd stacked(rows, n);
  ordered_json levels = ordered_json::array();
  Eigen::Index off = 0;
  for (int k = nets.k_min(); k <= nets.k_max(); ++k) {
    const int l = nets.level_index(k);
    const auto& v = s.values[static_cast<std::size_t>(l)];
    stacked.middleRows(off, v.rows()) = v;
    ordered_json lev;
    lev["k"] = k;
    lev["rows"] = v.rows();
    lev["row_offset"] = off;
    lev["net"] = nets.net(k);
    lev["mu"] = std::vector<double>(
        s.mu[static_cast<std::size_t>(l)].data(),
        s.mu[static_cast<std::size_t>(l)].data() + s.mu[static_cast<std::size_t>(l)].size());
    lev["nu"] = std::vector<double>(
        s.nu[static_cast<std::size_t>(l)].data(),
        s.nu[static_cast<std::size_t>(l)].data() + s.nu[static_cast<std::size_t>(l)].size());
    lev["interpolation_exact"] =
        static_cast<bool>(s.interpolation_exact[static_cast<std::size_t>(l)]);
    levels.push_back(lev);
    off += v.rows();
  }
  write_f64_matrix(out_path(c, "splines.f64"), stacked);

  ordered_json refs = ordered_json::array();
  for (std::size_t t = 0; t < s.p_coeffs.size(); ++t) {
    const std::string fname = "refinement_" + std::to_string(t) + ".f64";
    write_f64_matrix(out_path(c, fname), s.p_coeffs[t]);
    ordered_json r;
    r["transition"] = t;
    r["rows"] = s.p_coeffs[t].rows();
    r["cols"] = s.p_coeffs[t].cols();
    r["file"] = fname;
    r["residual"] = s.refinement_residual[t];
    r["degraded"] = static_cast<bool>(s.refinement_degraded[t]);
    refs.push_back(r);
  }

  ordered_json meta;
  meta["byte_order"] = "little-endian";
  meta["dtype"] = "float64";
  meta["points"] = n;
  meta["samples"] = s.samples;
  meta["seed"] = s.seed;
  meta["delta"] = nets.delta();
  meta["k_min"] = nets.k_min();
  meta["k_max"] = nets.k_max();
  meta["values_file"] = "splines.f64";
  meta["levels"] = levels;
  meta["refinement"] = refs;
  write_text_file(out_path(c, "splines.meta.json"), meta.dump(2) + "\n");
}

void write_basis_artifacts(const Workspace& ws) {
  const auto& basis = *ws.basis;
  const auto& c = ws.config;
  write_f64_matrix(out_path(c, "basis.f64"), basis.wavelet_values());
  write_f64_matrix(out_path(c, "coarse.f64"), basis.coarse_values());
  ordered_json meta;
  meta["byte_order"] = "little-endian";
  meta["dtype"] = "float64";
  meta["points"] = ws.space->size();
  meta["size"] = basis.size();
  meta["delta"] = ws.nets->delta();
  meta["eps0"] = basis.eps0();
  meta["c_lower"] = basis.c_lower();
  meta["c3_min"] = basis.c3_min();
  meta["min_core_ratio"] = basis.min_core_ratio();
  ordered_json items = ordered_json::array();
  for (const auto& it : basis.items()) {
    ordered_json ji;
    ji["k"] = it.k;
    ji["alpha"] = it.alpha;
    ji["beta"] = it.beta;
    items.push_back(ji);
  }
  meta["items"] = items;
  meta["coarse"] = basis.coarse_alphas();
  meta["excluded_levels"] = basis.excluded_levels();
  meta["wavelets_file"] = "basis.f64";
  meta["coarse_file"] = "coarse.f64";
  write_text_file(out_path(c, "basis.meta.json"), meta.dump(2) + "\n");
}

void write_common_artifacts(const Workspace& ws) {
  const auto& c = ws.config;
  write_text_file(out_path(c, "config_resolved.json"), c.canonical_json() + "\n");
  write_profile(ws, out_path(c, "profile.json"));
  write_text_file(out_path(c, "cubes.json"), cubes_to_json(*ws.cubes));
  write_spline_artifacts(ws);
}

}  // namespace

int cmd_build(const RunConfig& config) {
  const Workspace ws = build_all(config);
  write_common_artifacts(ws);
  write_basis_artifacts(ws);
  ordered_json meta;
  meta["version"] = "1.0.0";
  meta["config_hash"] = hash_hex(config.hash());
  meta["points"] = ws.space->size();
  meta["levels"] = ws.nets->level_count();
  meta["wavelets"] = ws.basis->size();
  meta["coarse"] = static_cast<int>(ws.basis->coarse_alphas().size());
  write_text_file(out_path(config, "build_meta.json"), meta.dump(2) + "\n");
  std::cout << "built " << ws.space->size() << " points, "
            << ws.nets->level_count() << " levels, " << ws.basis->size()
            << " wavelets + " << ws.basis->coarse_alphas().size()
            << " coarse functions -> " << config.out_dir << "\n";
  return 0;
}

int cmd_verify(const RunConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const Workspace ws = build_all(config);
  const Report rep = run_verify(ws);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  write_text_file(out_path(config, "report.json"), rep.to_json());
  write_text_file(out_path(config, "checks.csv"), rep.to_csv());
  write_text_file(out_path(config, "timing.json"),
                  "{\"wall_seconds\": " + std::to_string(secs) + "}\n");
  for (const auto& c : rep.checks) {
    std::cout << "[" << c.status << "] " << c.name;
    if (!c.note.empty()) std::cout << "  (" << c.note << ")";
    std::cout << "\n";
  }
  std::cout << rep.checks.size() << " checks, " << rep.fail_count()
            << " failed\n";
  return rep.all_pass() ? 0 : 1;
}

int cmd_splines(const RunConfig& config) {
  const Workspace ws = build_stages(config, false);
  write_common_artifacts(ws);
  const auto& s = *ws.splines;
  double pou = 0.0;
  for (const auto& v : s.values)
    pou = std::max(pou, (v.colwise().sum().array() - 1.0).abs().maxCoeff());
  double rmax = 0.0;
  for (double r : s.refinement_residual) rmax = std::max(rmax, r);
  std::cout << "spline table written to " << config.out_dir << " ("
            << s.samples << " samples); partition dev " << pou
            << ", refinement residual " << rmax << "\n";
  return 0;
}

int cmd_analyze(const RunConfig& config, const std::string& function_path) {
  const Workspace ws = build_all(config);
  const int n = ws.space->size();
  const auto vals = read_function_file(function_path, static_cast<std::size_t>(n));
  const Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(vals.data(), n);
  const CoefficientField coeffs = analyze(*ws.basis, f);
  ordered_json j;
  j["function"] = function_path;
  j["l1"] = lq_norm(*ws.space, f, 1.0);
  j["l2"] = lq_norm(*ws.space, f, 2.0);
  j["wavelet_energy"] = coeffs.wavelet.squaredNorm();
  j["coarse_energy"] = coeffs.coarse.squaredNorm();
  j["norm_iii"] = norm_iii(*ws.basis, coeffs.wavelet);
  j["norm_iv"] = norm_iv(*ws.basis, coeffs.wavelet);
  j["norm_v"] = norm_v(*ws.basis, coeffs.wavelet);
  write_text_file(out_path(config, "analysis.json"), j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_decompose(const RunConfig& config, const std::string& function_path) {
  const Workspace ws = build_all(config);
  const int n = ws.space->size();
  const auto vals = read_function_file(function_path, static_cast<std::size_t>(n));
  const Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(vals.data(), n);
  const CoefficientField coeffs = analyze(*ws.basis, f);
  const AtomicDecomposition d = decompose(*ws.basis, coeffs.wavelet);

  Eigen::MatrixXd molecules(static_cast<Eigen::Index>(d.pieces.size()), n);
  ordered_json pieces = ordered_json::array();
  for (std::size_t i = 0; i < d.pieces.size(); ++i) {
    const auto& p = d.pieces[i];
    molecules.row(static_cast<Eigen::Index>(i)) = p.molecule.transpose();
    ordered_json jp;
    jp["k"] = p.k;
    jp["theta"] = p.theta;
    jp["cube_level"] = p.cube_level;
    jp["lambda"] = p.lambda;
    jp["ball"] = {{"center", p.ball.center}, {"radius", p.ball.radius}};
    jp["indices"] = p.indices;
    pieces.push_back(jp);
  }
  ordered_json j;
  j["function"] = function_path;
  j["pieces"] = pieces;
  ordered_json jl = ordered_json::array();
  for (const auto& l : d.levels) {
    ordered_json e;
    e["k"] = l.k;
    e["omega_mass"] = l.omega_mass;
    e["selected"] = l.selected;
    e["retired"] = l.retired;
    e["maximal"] = l.maximal;
    jl.push_back(e);
  }
  j["levels"] = jl;
  j["total_lambda"] = d.total_lambda;
  j["phi_l1"] = d.phi_l1;
  j["C2"] = d.C2;
  j["k_lo"] = d.k_lo;
  j["k_hi"] = d.k_hi;
  j["resynthesis_dev"] = d.resynthesis_dev;
  j["partition_ok"] = d.partition_ok;
  j["molecules_file"] = "molecules.f64";
  j["molecule_rows"] = static_cast<int>(d.pieces.size());
  j["molecule_cols"] = n;
  write_text_file(out_path(config, "decomposition.json"), j.dump(2) + "\n");
  write_f64_matrix(out_path(config, "molecules.f64"), molecules);
  std::cout << d.pieces.size() << " pieces, total weight " << d.total_lambda
            << ", resynthesis deviation " << d.resynthesis_dev << "\n";
  return 0;
}

int cmd_report(const RunConfig& config) {
  const std::string text = read_text_file(out_path(config, "report.json"));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("report parse error: ") + e.what());
  }
  int fails = 0, passes = 0, infos = 0;
  std::cout << "space " << j.value("space", std::string("?")) << ", config "
            << j.value("config_hash", std::string("?")) << "\n";
  for (const auto& c : j.at("checks")) {
    const std::string status = c.at("status").get<std::string>();
    if (status == "fail") ++fails;
    if (status == "pass") ++passes;
    if (status == "info") ++infos;
    std::cout << "  [" << status << "] " << c.at("name").get<std::string>();
    const std::string note = c.value("note", std::string());
    if (!note.empty()) std::cout << "  (" << note << ")";
    std::cout << "\n";
  }
  std::cout << passes << " pass, " << fails << " fail, " << infos << " info\n";
  return fails > 0 ? 1 : 0;
}

}  // namespace homwave
