// Acceptance gate: twelve end-to-end criteria over four reference spaces,
// one pass/fail line each. Exit status is the number of failed criteria.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "homwave/hardy.hpp"
#include "homwave/pipeline.hpp"
#include "homwave/rng.hpp"

using namespace homwave;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int g_failures = 0;

void report(int id, bool pass, const std::string& title, const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("[%2d/12] %s  %s%s%s\n", id, pass ? "PASS" : "FAIL", title.c_str(),
              detail.empty() ? "" : "  -- ", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::filesystem::path work_dir() {
  auto p = std::filesystem::temp_directory_path() / "homwave_acceptance";
  std::filesystem::create_directories(p);
  return p;
}

std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string write_file(const std::string& name, const std::string& content) {
  const auto p = work_dir() / name;
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  return p.string();
}

std::string grid1d_csv(int n) {
  std::string csv = "id,x1,weight\n";
  for (int i = 0; i < n; ++i)
    csv += "p" + std::to_string(i) + "," + full(static_cast<double>(i) / n) + "," +
           full(1.0 / n) + "\n";
  return csv;
}

std::string grid2d_csv(int side) {
  std::string csv = "id,x1,x2,weight\n";
  const double h = 1.0 / side;
  const double w = 1.0 / (side * side);
  for (int i = 0; i < side * side; ++i)
    csv += "q" + std::to_string(i) + "," + full((i % side) * h) + "," +
           full((i / side) * h) + "," + full(w) + "\n";
  return csv;
}

/// Seeded random geometric graph on the unit square; the radius grows until
/// the graph is connected, so the construction is total and deterministic.
void write_rgg(int n, std::uint64_t seed, std::string& edges_path, std::string& weights_path) {
  Rng rng(seed);
  std::vector<std::array<double, 2>> pts(static_cast<std::size_t>(n));
  for (auto& p : pts) p = {rng.uniform01(), rng.uniform01()};

  auto name = [](int i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "n%03d", i);
    return std::string(buf);
  };

  double radius = 0.08;
  std::vector<std::array<int, 2>> edges;
  for (;;) {
    edges.clear();
    std::vector<int> root(static_cast<std::size_t>(n));
    std::iota(root.begin(), root.end(), 0);
    auto find = [&](int x) {
      while (root[static_cast<std::size_t>(x)] != x) {
        root[static_cast<std::size_t>(x)] =
            root[static_cast<std::size_t>(root[static_cast<std::size_t>(x)])];
        x = root[static_cast<std::size_t>(x)];
      }
      return x;
    };
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double dx = pts[static_cast<std::size_t>(i)][0] - pts[static_cast<std::size_t>(j)][0];
        const double dy = pts[static_cast<std::size_t>(i)][1] - pts[static_cast<std::size_t>(j)][1];
        if (std::hypot(dx, dy) <= radius) {
          edges.push_back({i, j});
          root[static_cast<std::size_t>(find(i))] = find(j);
        }
      }
    bool connected = true;
    for (int i = 1; i < n && connected; ++i) connected = find(i) == find(0);
    if (connected) break;
    radius *= 1.25;
  }

  std::string etext;
  for (const auto& e : edges) {
    const double dx = pts[static_cast<std::size_t>(e[0])][0] - pts[static_cast<std::size_t>(e[1])][0];
    const double dy = pts[static_cast<std::size_t>(e[0])][1] - pts[static_cast<std::size_t>(e[1])][1];
    etext += name(e[0]) + "," + name(e[1]) + "," + full(std::hypot(dx, dy)) + "\n";
  }
  std::string wtext;
  for (int i = 0; i < n; ++i) wtext += name(i) + "," + full(1.0 / n) + "\n";
  edges_path = write_file("rgg_edges.csv", etext);
  weights_path = write_file("rgg_weights.csv", wtext);
}

struct Bundle {
  std::string tag;
  std::unique_ptr<MetricMeasureSpace> space;
  std::unique_ptr<NetHierarchy> nets;
  std::unique_ptr<DyadicSystem> cubes;
  std::unique_ptr<SplineSystem> splines;
  std::unique_ptr<WaveletBasis> basis;
};

Bundle make_bundle(const std::string& tag, MetricMeasureSpace&& sp) {
  Bundle b;
  b.tag = tag;
  b.space = std::make_unique<MetricMeasureSpace>(std::move(sp));
  b.nets = std::make_unique<NetHierarchy>(build_nets(*b.space, 0.25));
  b.cubes = std::make_unique<DyadicSystem>(
      build_cubes(*b.nets, assign_parents(*b.nets, ParentMode::nearest)));
  b.splines = std::make_unique<SplineSystem>(estimate_splines(*b.nets, 256, 2, 8));
  b.basis = std::make_unique<WaveletBasis>(build_wavelets(*b.splines, *b.cubes));
  return b;
}

Eigen::VectorXd random_vec(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Ball random_ball(const MetricMeasureSpace& sp, Rng& rng) {
  for (int tries = 0; tries < 4000; ++tries) {
    const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(sp.size())));
    const double lo = 2.0 * sp.min_gap();
    const double hi = std::max(0.75 * sp.diameter(), 4.0 * sp.min_gap());
    const double r = std::exp(rng.uniform(std::log(lo), std::log(hi)));
    if (sp.ball_points(c, r).size() >= 2) return Ball{c, r};
  }
  return Ball{0, sp.diameter() + 1.0};
}

// --- criteria ---------------------------------------------------------------

void criterion_1(const std::vector<const Bundle*>& spaces, const std::string& grid_a_path) {
  bool ok = true;
  double worst_time = 0.0;
  std::string why;
  for (const auto* b : spaces) {
    const auto t0 = std::chrono::steady_clock::now();
    auto nets = build_nets(*b->space, 0.25);
    auto cubes = build_cubes(nets, assign_parents(nets, ParentMode::nearest));
    const auto rep = verify_cube_axioms(cubes);
    const double secs = seconds_since(t0);
    worst_time = std::max(worst_time, secs);
    if (!rep.ok(false)) {
      ok = false;
      why = "axioms broke on " + b->tag;
    }
    if (secs >= 10.0) {
      ok = false;
      why = "too slow on " + b->tag;
    }
  }

  // strict ratio run: delta 1/100 derives exactly three levels on the line
  const auto t0 = std::chrono::steady_clock::now();
  auto sp = load_space(grid_a_path, SpaceFormat::coords);
  auto nets = build_nets(sp, 0.01);
  auto cubes = build_cubes(nets, assign_parents(nets, ParentMode::nearest));
  const auto rep = verify_cube_axioms(cubes);
  const double strict_secs = seconds_since(t0);
  if (nets.level_count() != 3) {
    ok = false;
    why = fmt("strict run derived %d levels", nets.level_count());
  }
  if (!rep.ok(true) || !rep.sandwich_ok) {
    ok = false;
    why = fmt("strict sandwich failed: inner %.3f outer %.3f", rep.inner_ratio, rep.outer_ratio);
  }
  if (strict_secs >= 10.0) {
    ok = false;
    why = "strict run too slow";
  }

  report(1, ok, "dyadic cube axioms hold on all four spaces and in a strict 1/100 run",
         ok ? fmt("max %.2fs, strict inner %.2f outer %.2f in %.2fs", worst_time,
                  rep.inner_ratio, rep.outer_ratio, strict_secs)
            : why);
}

void criterion_2(const Bundle& a) {
  const auto t0 = std::chrono::steady_clock::now();
  auto spl = estimate_splines(*a.nets, 256, 2, 8);
  double pou_dev = 0.0;
  bool interp = true;
  double worst_resid = 0.0;
  for (int k = a.nets->k_min(); k <= a.nets->k_max(); ++k) {
    const auto l = static_cast<std::size_t>(a.nets->level_index(k));
    for (int x = 0; x < a.space->size(); ++x)
      pou_dev = std::max(pou_dev, std::abs(spl.values[l].col(x).sum() - 1.0));
    if (!spl.interpolation_exact[l]) interp = false;
    if (k < a.nets->k_max())
      worst_resid = std::max(worst_resid, spl.refinement_residual[l]);
  }
  const double secs = seconds_since(t0);
  const bool ok = pou_dev <= 1e-12 && interp && worst_resid <= 2.0 / std::sqrt(256.0) &&
                  secs < 60.0;
  report(2, ok, "spline partition, interpolation and refinement identities at R=256",
         fmt("pou %.1e, refinement %.3f <= 0.125, %.1fs", pou_dev, worst_resid, secs));
}

void criterion_3(const std::vector<const Bundle*>& spaces) {
  bool ok = true;
  double worst = 0.0;
  std::string why;
  for (const auto* b : spaces) {
    const auto ex = verify_exactness(*b->basis, 20, 7);
    const double dev = std::max({ex.orthonormality_dev, ex.cancellation_dev,
                                 ex.roundtrip_dev, ex.plancherel_dev});
    worst = std::max(worst, dev);
    if (!(ex.dimension_ok && dev <= 1e-8 && !b->basis->flagged())) {
      ok = false;
      why = "basis exactness broke on " + b->tag + fmt(" (dev %.2e)", dev);
    }
  }
  report(3, ok, "wavelet bases are complete and orthonormal to 1e-8 on all four spaces",
         ok ? fmt("worst deviation %.2e", worst) : why);
}

void criterion_4(const std::vector<const Bundle*>& spaces) {
  bool ok = true;
  double worst_cross = 0.0;
  std::string why;
  for (const auto* b : spaces) {
    for (int k = b->nets->k_min(); k < b->nets->k_max(); ++k) {
      const auto g = gram(*b->splines, k);
      if (g.Mtilde.rows() == 0) continue;
      const Eigen::MatrixXd se = inv_sqrt(g.Mtilde, InvSqrtMethod::eig, 1e-10);
      const Eigen::MatrixXd sn = inv_sqrt(g.Mtilde, InvSqrtMethod::neumann, 1e-10);
      const double diff = (se - sn).cwiseAbs().maxCoeff();
      worst_cross = std::max(worst_cross, diff);
      if (diff > 1e-7) {
        ok = false;
        why = fmt("routes differ by %.2e on %s level %d", diff, b->tag.c_str(), k);
      }
    }
  }
  const auto coeffs = neumann_coefficients(65);
  double worst_coeff = 0.0;
  for (int n = 0; n <= 64; ++n) {
    const double ref =
        std::exp(std::lgamma(2.0 * n + 1.0) - 2.0 * std::lgamma(n + 1.0) - n * std::log(4.0));
    worst_coeff = std::max(worst_coeff, std::abs(coeffs[static_cast<std::size_t>(n)] - ref));
  }
  if (worst_coeff > 1e-12) {
    ok = false;
    why = fmt("series coefficients off by %.2e", worst_coeff);
  }
  report(4, ok,
         "spectral and series inverse square roots agree to 1e-7 at every level",
         ok ? fmt("worst cross %.2e, worst coefficient %.2e", worst_cross, worst_coeff) : why);
}

void criterion_5(const std::vector<const Bundle*>& spaces) {
  bool ok = true;
  double worst_eps0 = 1.0, worst_ratio = 1.0;
  std::string why;
  for (const auto* b : spaces) {
    const auto lb = verify_lower_bound(*b->basis);
    worst_eps0 = std::min(worst_eps0, lb.eps0);
    worst_ratio = std::min(worst_ratio, lb.min_ratio);
    if (!(lb.feasible && lb.eps0 >= 1.0 / 64 && lb.c_lower > 0.0 &&
          lb.min_ratio >= 1e-3 && lb.min_ratio <= 1.0)) {
      ok = false;
      why = "core search failed on " + b->tag +
            fmt(" (eps0 %.4f ratio %.2e)", lb.eps0, lb.min_ratio);
    }
  }
  report(5, ok, "core balls keep eps0 >= 1/64 with volume ratios in [1e-3, 1]",
         ok ? fmt("min eps0 %.4f, min ratio %.3f", worst_eps0, worst_ratio) : why);
}

void criterion_6(const std::vector<const Bundle*>& spaces) {
  bool ok = true;
  double worst_nu = kInf;
  std::string why;
  for (const auto* b : spaces) {
    const auto dec = verify_decay(*b->basis);
    worst_nu = std::min(worst_nu, dec.nu_fit);
    if (!(dec.nu_fit > 0.0 && dec.violations == 0)) {
      ok = false;
      why = "decay envelope broke on " + b->tag +
            fmt(" (nu %.3f, %ld violations)", dec.nu_fit, dec.violations);
    }
  }
  report(6, ok, "wavelets decay exponentially under a 1.05 fitted envelope",
         ok ? fmt("min decay rate %.3f", worst_nu) : why);
}

void criterion_7(const Bundle& a) {
  const auto& sp = *a.space;
  const auto& basis = *a.basis;
  const int m = basis.size();

  int mol_pass = 0;
  double max_eta_sum = 0.0;
  Rng mrng(0x301e);
  for (int i = 0; i < 100; ++i) {
    const int idx = static_cast<int>(mrng.below(static_cast<std::uint64_t>(m)));
    const auto& item = basis.items()[static_cast<std::size_t>(idx)];
    const double sc = a.nets->scale(item.k);
    const Eigen::VectorXd mol =
        basis.wavelet_values().col(idx) / std::sqrt(sp.volume(item.beta, sc));
    const auto mr = validate_molecule(sp, mol, Ball{item.beta, sc}, 2.0);
    if (mr.ok() && std::isfinite(mr.eta_weighted_sum)) ++mol_pass;
    max_eta_sum = std::max(max_eta_sum, mr.eta_weighted_sum);
  }

  int atom_pass = 0;
  Rng arng(0xa70);
  for (int i = 0; i < 100; ++i) {
    const Ball ball = random_ball(sp, arng);
    const double q = (i % 2 == 0) ? 2.0 : kInf;
    const auto atom = make_atom(sp, ball, q, arng.next_u64());
    if (validate_atom(sp, atom.values, ball, q).ok()) ++atom_pass;
  }

  const bool ok = mol_pass == 100 && atom_pass == 100;
  report(7, ok, "100 scaled wavelets validate as molecules and 100 atoms as atoms",
         fmt("molecules %d/100, atoms %d/100, max eta sum %.2f", mol_pass, atom_pass,
             max_eta_sum));
}

void criterion_8(const std::vector<const Bundle*>& spaces) {
  bool ok = true;
  double worst_ratio = 0.0;
  std::string why;
  for (const auto* b : spaces) {
    Rng rng(0x3d00 + static_cast<std::uint64_t>(b->space->size()));
    for (int fi = 0; fi < 20 && ok; ++fi) {
      Eigen::VectorXd f = random_vec(b->space->size(), rng);
      f(static_cast<int>(rng.below(static_cast<std::uint64_t>(b->space->size())))) *= 30.0;
      const Eigen::VectorXd mdy = dyadic_maximal(*b->cubes, f);
      const double top = mdy.maxCoeff();
      std::vector<double> lambdas;
      for (int j = 0; j < 20; ++j)
        lambdas.push_back(top * 0.99 * std::pow(10.0, -3.0 * j / 19.0));
      const auto rep = weak11_check(*b->cubes, f, lambdas);
      worst_ratio = std::max(worst_ratio, rep.max_ratio);
      if (!rep.ok || rep.max_ratio > 1.0 + 1e-12) {
        ok = false;
        why = "weak bound broke on " + b->tag + fmt(" (ratio %.6f)", rep.max_ratio);
      }
    }
  }
  report(8, ok, "the dyadic maximal weak bound holds with constant exactly one",
         ok ? fmt("20 functions x 20 thresholds per space, worst ratio %.4f", worst_ratio)
            : why);
}

void criterion_9(const Bundle& a) {
  Rng rng(0xdec1);
  bool all_ok = true;
  double lo = kInf, hi = 0.0, worst_res = 0.0;
  std::string why;
  for (int i = 0; i < 50; ++i) {
    const Ball ball = random_ball(*a.space, rng);
    const auto atom = make_atom(*a.space, ball, 2.0, rng.next_u64());
    const auto cf = analyze(*a.basis, atom.values);
    const auto d = decompose(*a.basis, cf.wavelet);
    worst_res = std::max(worst_res, d.resynthesis_dev);
    if (!d.partition_ok || d.resynthesis_dev > 1e-8) {
      all_ok = false;
      why = fmt("piece structure broke on atom %d (resynthesis %.2e)", i, d.resynthesis_dev);
    }
    if (d.phi_l1 > 0.0) {
      const double ratio = d.total_lambda / d.phi_l1;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  const bool band_ok = lo > 0.0 && hi / lo <= 100.0;
  if (!band_ok) why = fmt("lambda ratio band [%.2f, %.2f] too wide", lo, hi);
  report(9, all_ok && band_ok,
         "50 atoms decompose into molecules with a two-decade coefficient band",
         (all_ok && band_ok)
             ? fmt("lambda/phi in [%.2f, %.2f], resynthesis %.1e", lo, hi, worst_res)
             : why);
}

void criterion_10(const Bundle& a) {
  const auto band1 = norm_equivalence_band(*a.basis, 100, 0xe91b);
  const auto band2 = norm_equivalence_band(*a.basis, 100, 0x517e);
  auto spread_ok = [](double lo, double hi) { return lo > 0.0 && hi / lo <= 100.0; };
  auto stable = [](double x, double y) {
    const double r = x > y ? x / y : y / x;
    return r <= 1.5;
  };
  const bool ok = spread_ok(band1.lo35, band1.hi35) && spread_ok(band1.lo45, band1.hi45) &&
                  spread_ok(band2.lo35, band2.hi35) && spread_ok(band2.lo45, band2.hi45) &&
                  stable(band1.lo35, band2.lo35) && stable(band1.hi35, band2.hi35) &&
                  stable(band1.lo45, band2.lo45) && stable(band1.hi45, band2.hi45);
  report(10, ok, "square function norm ratios band within x100 and rerun-stable to x1.5",
         fmt("iii/v [%.2f, %.2f] vs [%.2f, %.2f]; iv/v [%.2f, %.2f] vs [%.2f, %.2f]",
             band1.lo35, band1.hi35, band2.lo35, band2.hi35, band1.lo45, band1.hi45,
             band2.lo45, band2.hi45));
}

void criterion_11() {
  auto band = [](std::uint64_t seed) {
    std::array<double, 4> r{kInf, 0.0, kInf, 0.0};  // a1, b1, a4, b4
    for (int v = 0; v < 50; ++v) {
      Rng rng = Rng::derived(seed, 0x4b00 + static_cast<std::uint64_t>(v));
      Eigen::VectorXd lam = random_vec(64, rng);
      const double r1 = khintchine_ratio(lam, 2000, 1.0,
                                         seed ^ (0x9100 + static_cast<std::uint64_t>(v)));
      const double r4 = khintchine_ratio(lam, 2000, 4.0,
                                         seed ^ (0x9400 + static_cast<std::uint64_t>(v)));
      r[0] = std::min(r[0], r1);
      r[1] = std::max(r[1], r1);
      r[2] = std::min(r[2], r4);
      r[3] = std::max(r[3], r4);
    }
    return r;
  };
  const auto b1 = band(3);
  const auto b2 = band(0xbeef);
  bool ok = b1[0] > 0.0 && b1[1] <= 1.0 + 1e-9 && b1[2] >= 0.9;
  for (int i = 0; i < 4; ++i) {
    const double r = b1[static_cast<std::size_t>(i)] > b2[static_cast<std::size_t>(i)]
                         ? b1[static_cast<std::size_t>(i)] / b2[static_cast<std::size_t>(i)]
                         : b2[static_cast<std::size_t>(i)] / b1[static_cast<std::size_t>(i)];
    if (r > 1.3) ok = false;
  }
  report(11, ok, "Khintchine ratio bands over 50 vectors are rerun-stable to x1.3",
         fmt("q=1 [%.3f, %.3f] vs [%.3f, %.3f]; q=4 [%.3f, %.3f] vs [%.3f, %.3f]", b1[0],
             b1[1], b2[0], b2[1], b1[2], b1[3], b2[2], b2[3]));
}

void criterion_12(const std::string& grid_a_path) {
  RunConfig cfg;
  cfg.space_path = grid_a_path;
  cfg.format = "coords";
  cfg.space_id = "line-1024";

  cfg.threads = 8;
  const Workspace w8a = build_all(cfg);
  const Report r8a = run_verify(w8a);
  const Workspace w8b = build_all(cfg);
  const Report r8b = run_verify(w8b);
  cfg.threads = 1;
  const Workspace w1 = build_all(cfg);
  const Report r1 = run_verify(w1);

  const bool bytes_ok = r8a.to_json() == r8b.to_json() && r8a.to_json() == r1.to_json() &&
                        r8a.to_csv() == r1.to_csv();
  const bool clean = r8a.fail_count() == 0 && r1.fail_count() == 0;
  report(12, bytes_ok && clean,
         "full verify reports are byte-identical across reruns and thread counts",
         fmt("%zu checks, %zu failures, reports %s", r8a.checks.size(), r8a.fail_count(),
             bytes_ok ? "identical" : "DIFFER"));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();

  const std::string grid_a = write_file("grid_a.csv", grid1d_csv(1024));
  const std::string grid_b = write_file("grid_b.csv", grid2d_csv(32));
  std::string rgg_edges, rgg_weights;
  write_rgg(500, 0x5eed, rgg_edges, rgg_weights);

  LoadOptions snow;
  snow.snowflake_eps = 0.7;
  LoadOptions graph;
  graph.weights_path = rgg_weights;

  std::printf("building four reference spaces and their wavelet systems...\n");
  Bundle a = make_bundle("line-1024", load_space(grid_a, SpaceFormat::coords));
  Bundle b = make_bundle("grid-32x32", load_space(grid_b, SpaceFormat::coords));
  Bundle c = make_bundle("snowflake-0.7", load_space(grid_a, SpaceFormat::coords, snow));
  Bundle d = make_bundle("rgg-500", load_space(rgg_edges, SpaceFormat::graph, graph));
  std::printf("spaces ready after %.1fs\n", seconds_since(t0));

  const std::vector<const Bundle*> all = {&a, &b, &c, &d};
  const std::vector<const Bundle*> abc = {&a, &b, &c};

  criterion_1(all, grid_a);
  criterion_2(a);
  criterion_3(all);
  criterion_4(all);
  criterion_5(abc);
  criterion_6(all);
  criterion_7(a);
  criterion_8(all);
  criterion_9(a);
  criterion_10(a);
  criterion_11();
  criterion_12(grid_a);

  std::printf("ACCEPTANCE: %d/12 passed in %.1fs\n", 12 - g_failures, seconds_since(t0));
  return g_failures;
}
