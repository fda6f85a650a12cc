#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace homwave {

// Matrices on disk are raw row-major float64, little-endian, no header.
// Dimensions travel in a JSON sidecar next to the payload.
void write_f64_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_f64_matrix(const std::string& path, std::size_t rows,
                                std::size_t cols);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// One real per line, blank lines and '#' comments ignored.  Reports the
// 1-based line number on malformed input.
std::vector<double> read_function_file(const std::string& path,
                                       std::size_t expected_size);

}  // namespace homwave
