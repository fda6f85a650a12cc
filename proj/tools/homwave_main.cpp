#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "homwave/pipeline.hpp"

namespace {

struct CliValues {
  std::optional<std::string> config, space, format, weights, space_id, out;
  std::optional<double> delta, snowflake;
  std::optional<int> kmin, kmax, samples, threads, neumann;
  std::optional<std::uint64_t> seed;
  bool strict = false;
};

void add_common(CLI::App* app, CliValues& c) {
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--space", c.space, "space input file");
  app->add_option("--format", c.format, "coords | matrix | graph");
  app->add_option("--weights", c.weights, "node weight CSV (graph format)");
  app->add_option("--space-id", c.space_id, "label recorded in reports");
  app->add_option("--snowflake", c.snowflake,
                  "replace the metric d by d^eps, 0 < eps <= 1");
  app->add_option("--delta", c.delta, "scale ratio in (0, 1/2]");
  app->add_option("--k-min", c.kmin, "coarsest level (default: derived)");
  app->add_option("--k-max", c.kmax, "finest level (default: derived)");
  app->add_flag("--strict-delta", c.strict,
                "assert the strong cube bounds (needs delta <= 1/96)");
  app->add_option("--samples", c.samples, "Monte Carlo draws per spline");
  app->add_option("--seed", c.seed,
                  "base seed; lattice/splines/experiments use seed, seed+1, seed+2");
  app->add_option("--threads", c.threads, "worker threads");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--neumann-max-dim", c.neumann,
                  "largest Gram size the series route is cross-checked on");
}

homwave::RunConfig resolve(const CliValues& c) {
  homwave::RunConfig cfg =
      c.config ? homwave::RunConfig::from_file(*c.config) : homwave::RunConfig{};
  if (c.space) cfg.space_path = *c.space;
  if (c.format) cfg.format = *c.format;
  if (c.weights) cfg.weights_path = *c.weights;
  if (c.space_id) cfg.space_id = *c.space_id;
  if (c.snowflake) cfg.snowflake_eps = *c.snowflake;
  if (c.delta) cfg.delta = *c.delta;
  if (c.kmin) cfg.k_min = *c.kmin;
  if (c.kmax) cfg.k_max = *c.kmax;
  if (c.strict) cfg.strict_delta = true;
  if (c.samples) cfg.mc_samples = *c.samples;
  if (c.seed) {
    cfg.seed_lattice = *c.seed;
    cfg.seed_splines = *c.seed + 1;
    cfg.seed_experiments = *c.seed + 2;
  }
  if (c.threads) cfg.threads = *c.threads;
  if (c.out) cfg.out_dir = *c.out;
  if (c.neumann) cfg.neumann_max_dim = *c.neumann;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiscale wavelet analysis on finite doubling spaces"};
  app.require_subcommand(1);
  CliValues c;
  std::string function_path;

  auto* build = app.add_subcommand(
      "build", "build nets, cubes, splines and the wavelet basis; write artifacts");
  add_common(build, c);
  auto* verify = app.add_subcommand(
      "verify", "run the full check suite and write report.json / checks.csv");
  add_common(verify, c);
  auto* splines = app.add_subcommand(
      "splines", "build and export the spline table only");
  add_common(splines, c);
  auto* analyze = app.add_subcommand(
      "analyze", "expand a function over the basis and report its norms");
  add_common(analyze, c);
  analyze->add_option("--function", function_path, "one value per cloud point")
      ->required();
  auto* decompose = app.add_subcommand(
      "decompose", "stopping-time decomposition of a function into molecules");
  add_common(decompose, c);
  decompose->add_option("--function", function_path, "one value per cloud point")
      ->required();
  auto* report = app.add_subcommand(
      "report", "pretty-print an existing report.json; exit 1 on failures");
  add_common(report, c);

  CLI11_PARSE(app, argc, argv);

  try {
    const homwave::RunConfig cfg = resolve(c);
    if (build->parsed()) return homwave::cmd_build(cfg);
    if (verify->parsed()) return homwave::cmd_verify(cfg);
    if (splines->parsed()) return homwave::cmd_splines(cfg);
    if (analyze->parsed()) return homwave::cmd_analyze(cfg, function_path);
    if (decompose->parsed()) return homwave::cmd_decompose(cfg, function_path);
    if (report->parsed()) return homwave::cmd_report(cfg);
  } catch (const homwave::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
