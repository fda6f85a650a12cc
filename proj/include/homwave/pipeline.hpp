#pragma once

#include <memory>
#include <string>

#include "homwave/hardy.hpp"
#include "homwave/lattice.hpp"
#include "homwave/report.hpp"
#include "homwave/space.hpp"
#include "homwave/splines.hpp"
#include "homwave/wavelets.hpp"

namespace homwave {

/// Every stage of one run, built in dependency order. Heap storage keeps the
/// cross-stage pointers stable, so the struct itself is movable.
struct Workspace {
  RunConfig config;
  std::unique_ptr<MetricMeasureSpace> space;
  SpaceProfile profile;
  std::unique_ptr<NetHierarchy> nets;
  std::unique_ptr<DyadicSystem> cubes;
  std::unique_ptr<SplineSystem> splines;
  std::unique_ptr<WaveletBasis> basis;
};

Workspace build_all(const RunConfig& config);

/// Runs the full fixed check suite against a built workspace. Pass-class
/// checks carry status pass/fail; measured constants without a proven bound
/// are recorded as info. The returned report serializes byte-identically for
/// identical configs regardless of thread count.
Report run_verify(const Workspace& ws);

int cmd_build(const RunConfig& config);
int cmd_verify(const RunConfig& config);
int cmd_splines(const RunConfig& config);
int cmd_analyze(const RunConfig& config, const std::string& function_path);
int cmd_decompose(const RunConfig& config, const std::string& function_path);
int cmd_report(const RunConfig& config);

}  // namespace homwave
