#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "homwave/space.hpp"

namespace testutil {

/// n points at i * spacing (default 1/n), each carrying mass 1/n.
inline homwave::MetricMeasureSpace grid1d(int n, double spacing = -1.0) {
  const double h = spacing > 0.0 ? spacing : 1.0 / n;
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = std::abs(i - j) * h;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);
  std::vector<Eigen::VectorXd> coords(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    coords[static_cast<std::size_t>(i)] = Eigen::VectorXd::Constant(1, i * h);
  }
  return homwave::MetricMeasureSpace(std::move(d), std::move(w), {}, std::move(coords));
}

/// side x side unit-square grid with the Euclidean metric, total mass one.
inline homwave::MetricMeasureSpace grid2d(int side) {
  const int n = side * side;
  const double h = 1.0 / side;
  std::vector<Eigen::VectorXd> coords(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd c(2);
    c << (i % side) * h, (i / side) * h;
    coords[static_cast<std::size_t>(i)] = c;
  }
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      d(i, j) = (coords[static_cast<std::size_t>(i)] - coords[static_cast<std::size_t>(j)]).norm();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);
  return homwave::MetricMeasureSpace(std::move(d), std::move(w), {}, std::move(coords));
}

inline std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() / "homwave_tests";
  std::filesystem::create_directories(p);
  return p;
}

inline std::string write_file(const std::string& name, const std::string& content) {
  auto p = temp_dir() / name;
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  return p.string();
}

inline std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Coordinate CSV for the 1d grid, matching grid1d(n) exactly.
inline std::string grid_csv(int n) {
  std::string csv = "id,x1,weight\n";
  for (int i = 0; i < n; ++i) {
    csv += "p" + std::to_string(i) + "," + fmt_full(static_cast<double>(i) / n) + "," +
           fmt_full(1.0 / n) + "\n";
  }
  return csv;
}

}  // namespace testutil
