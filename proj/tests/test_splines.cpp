#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "helpers.hpp"
#include "homwave/splines.hpp"

using namespace homwave;

namespace {

struct Fixture {
  MetricMeasureSpace sp;
  NetHierarchy nets;
  explicit Fixture(int n) : sp(testutil::grid1d(n)), nets(build_nets(sp, 0.25)) {}
};

}  // namespace

TEST_CASE("a single draw gives indicator splines") {
  Fixture fx(64);
  auto spl = estimate_splines(fx.nets, 1, 42);
  auto sys = sample_random_system(fx.nets, 42);  // draw 0 substream is seed ^ 0
  for (int k = fx.nets.k_min(); k <= fx.nets.k_max(); ++k)
    for (int a : fx.nets.net(k))
      for (int x = 0; x < fx.sp.size(); ++x) {
        const double v = spl.value(k, a, x);
        CHECK((v == 0.0 || v == 1.0));
        CHECK(v == (sys.cube_of(k, x) == a ? 1.0 : 0.0));
      }
}

TEST_CASE("partition of unity is exact for a power of two sample count") {
  Fixture fx(96);
  auto spl = estimate_splines(fx.nets, 256, 3);
  for (int k = fx.nets.k_min(); k <= fx.nets.k_max(); ++k) {
    const auto& vals = spl.values[static_cast<std::size_t>(fx.nets.level_index(k))];
    for (int x = 0; x < fx.sp.size(); ++x) {
      CHECK(vals.col(x).sum() == 1.0);
      CHECK(vals.col(x).minCoeff() >= 0.0);
      CHECK(vals.col(x).maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("interpolation identity at net points is exact") {
  Fixture fx(96);
  auto spl = estimate_splines(fx.nets, 64, 9);
  for (int k = fx.nets.k_min(); k <= fx.nets.k_max(); ++k) {
    CHECK(spl.interpolation_exact[static_cast<std::size_t>(fx.nets.level_index(k))] == 1);
    for (int a : fx.nets.net(k))
      for (int b : fx.nets.net(k)) CHECK(spl.value(k, a, b) == (a == b ? 1.0 : 0.0));
  }
}

TEST_CASE("spline values are exact draw frequencies") {
  Fixture fx(32);
  const int R = 16;
  const std::uint64_t seed = 77;
  auto spl = estimate_splines(fx.nets, R, seed);
  std::vector<DyadicSystem> draws;
  draws.reserve(R);
  for (int r = 0; r < R; ++r)
    draws.push_back(sample_random_system(fx.nets, seed ^ static_cast<std::uint64_t>(r)));
  for (int k = fx.nets.k_min(); k <= fx.nets.k_max(); ++k)
    for (int a : fx.nets.net(k))
      for (int x = 0; x < fx.sp.size(); ++x) {
        int count = 0;
        for (const auto& d : draws)
          if (d.cube_of(k, x) == a) ++count;
        CHECK(spl.value(k, a, x) == static_cast<double>(count) / R);
      }
}

TEST_CASE("refinement coefficients come off the table and bound the residual") {
  Fixture fx(128);
  auto spl = estimate_splines(fx.nets, 256, 5);
  for (int k = fx.nets.k_min(); k < fx.nets.k_max(); ++k) {
    const int t = fx.nets.level_index(k);
    auto rc = refinement_coefficients(spl, k);
    CHECK_FALSE(rc.degraded);
    CHECK(spl.refinement_degraded[static_cast<std::size_t>(t)] == 0);
    CHECK((rc.p - spl.p_coeffs[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rc.residual <= 2.0 / std::sqrt(256.0));
    CHECK(rc.residual == spl.refinement_residual[static_cast<std::size_t>(t)]);
    CHECK(rc.p.minCoeff() >= 0.0);
    CHECK(rc.p.maxCoeff() <= 1.0);
    // table reading: p(a, b) = s^k_a(x^{k+1}_b), so columns sum to one exactly
    for (int c = 0; c < rc.p.cols(); ++c) CHECK(rc.p.col(c).sum() == 1.0);
  }
}

TEST_CASE("single draw refinement coefficients are zero one valued") {
  Fixture fx(64);
  auto spl = estimate_splines(fx.nets, 1, 21);
  auto sys = sample_random_system(fx.nets, 21);
  for (int k = fx.nets.k_min(); k < fx.nets.k_max(); ++k) {
    auto rc = refinement_coefficients(spl, k);
    const auto& fine = fx.nets.net(k + 1);
    for (int r = 0; r < rc.p.rows(); ++r)
      for (int c = 0; c < rc.p.cols(); ++c) {
        const double v = rc.p(r, c);
        CHECK((v == 0.0 || v == 1.0));
        const int a = fx.nets.net(k)[static_cast<std::size_t>(r)];
        const int xb = fine[static_cast<std::size_t>(c)];
        CHECK(v == (sys.cube_of(k, xb) == a ? 1.0 : 0.0));
      }
    // per-draw systems refine exactly
    CHECK(rc.residual == 0.0);
  }
}

TEST_CASE("mu and nu are ball volumes and integrals") {
  Fixture fx(64);
  auto spl = estimate_splines(fx.nets, 128, 13);
  for (int k = fx.nets.k_min(); k <= fx.nets.k_max(); ++k) {
    const int l = fx.nets.level_index(k);
    const auto& net = fx.nets.net(k);
    for (std::size_t r = 0; r < net.size(); ++r) {
      CHECK(spl.mu[static_cast<std::size_t>(l)](static_cast<Eigen::Index>(r)) ==
            fx.sp.volume(net[r], fx.nets.scale(k)));
      double integral = 0.0;
      for (int x = 0; x < fx.sp.size(); ++x)
        integral += fx.sp.weight(x) * spl.value(k, net[r], x);
      CHECK(spl.nu[static_cast<std::size_t>(l)](static_cast<Eigen::Index>(r)) ==
            doctest::Approx(integral).epsilon(1e-9));
      CHECK(spl.nu[static_cast<std::size_t>(l)](static_cast<Eigen::Index>(r)) > 0.0);
    }
  }
}

TEST_CASE("support radii really bracket the splines") {
  Fixture fx(96);
  auto spl = estimate_splines(fx.nets, 128, 15);
  auto sup = spline_support(spl);
  CHECK(sup.r_in >= 0.0);
  CHECK(sup.r_out >= sup.r_in);
  for (int k = fx.nets.k_min(); k <= fx.nets.k_max(); ++k) {
    const int l = fx.nets.level_index(k);
    const double sc = fx.nets.scale(k);
    const double rin = sup.r_in_level[static_cast<std::size_t>(l)];
    const double rout = sup.r_out_level[static_cast<std::size_t>(l)];
    for (int a : fx.nets.net(k))
      for (int x = 0; x < fx.sp.size(); ++x) {
        const double v = spl.value(k, a, x);
        if (fx.sp.dist(a, x) < rin * sc) CHECK(v == 1.0);
        if (v > 0.0) CHECK(fx.sp.dist(a, x) < rout * sc);
      }
  }
}

TEST_CASE("regularity exponent clears 0.3 on a dense one dimensional run") {
  auto sp = testutil::grid1d(256);
  auto nets = build_nets(sp, 0.25);
  auto spl = estimate_splines(nets, 400, 19, 4);
  auto reg = verify_spline_regularity(spl);
  int fitted = 0;
  for (const auto& lvl : reg.levels) {
    if (lvl.indicator_like || lvl.usable_pairs < 50 || !lvl.resolved) continue;
    ++fitted;
    CHECK(lvl.eta_est > 0.3);
    CHECK(lvl.C_est > 0.0);
  }
  CHECK(fitted >= 2);
}

TEST_CASE("single draw systems are flagged as indicators") {
  Fixture fx(64);
  auto spl = estimate_splines(fx.nets, 1, 23);
  auto reg = verify_spline_regularity(spl);
  bool any = false;
  for (const auto& lvl : reg.levels) {
    CHECK(lvl.indicator_like);
    any = true;
  }
  CHECK(any);
}

TEST_CASE("estimation is thread count invariant") {
  Fixture fx(72);
  auto s1 = estimate_splines(fx.nets, 64, 9, 1);
  auto s4 = estimate_splines(fx.nets, 64, 9, 4);
  REQUIRE(s1.values.size() == s4.values.size());
  for (std::size_t l = 0; l < s1.values.size(); ++l)
    CHECK((s1.values[l] - s4.values[l]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("riesz ratios bracket a nonzero band") {
  Fixture fx(128);
  auto spl = estimate_splines(fx.nets, 256, 31);
  auto band = riesz_band(spl, 24, 7);
  REQUIRE(band.size() == static_cast<std::size_t>(fx.nets.level_count()));
  for (const auto& lvl : band) {
    CHECK(lvl.r_min > 0.0);
    CHECK(lvl.r_min <= lvl.r_max);
    CHECK(std::isfinite(lvl.r_max));
  }
}
