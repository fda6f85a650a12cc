#include "homwave/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "homwave/common.hpp"

namespace homwave {

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xffu);
  return r;
}

void ensure_parent(const std::string& path) {
  const auto dir = std::filesystem::path(path).parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

}  // namespace

void write_f64_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path);
  std::vector<std::uint64_t> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row[static_cast<std::size_t>(j)] =
          to_little(std::bit_cast<std::uint64_t>(m(i, j)));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * 8));
  }
  require(out.good(), "write failed: " + path);
}

Eigen::MatrixXd read_f64_matrix(const std::string& path, std::size_t rows,
                                std::size_t cols) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open matrix file: " + path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  std::vector<std::uint64_t> row(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(cols * 8));
    require(in.gcount() == static_cast<std::streamsize>(cols * 8),
            "matrix file truncated: " + path);
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::bit_cast<double>(to_little(row[j]));
    }
  }
  return m;
}

void write_text_file(const std::string& path, const std::string& content) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  require(out.good(), "write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> read_function_file(const std::string& path,
                                       std::size_t expected_size) {
  std::ifstream in(path);
  require(in.good(), "cannot open function file: " + path);
  std::vector<double> values;
  values.reserve(expected_size);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(line.substr(start), &pos);
    } catch (const std::exception&) {
      throw Error("function file " + path + " line " +
                  std::to_string(line_no) + ": not a number: " + line);
    }
    const std::string rest = line.substr(start + pos);
    require(rest.find_first_not_of(" \t\r") == std::string::npos,
            "function file " + path + " line " + std::to_string(line_no) +
                ": trailing garbage: " + line);
    require(std::isfinite(v), "function file " + path + " line " +
                                  std::to_string(line_no) +
                                  ": non-finite value");
    values.push_back(v);
  }
  require(values.size() == expected_size,
          "function file " + path + " has " + std::to_string(values.size()) +
              " values, expected " + std::to_string(expected_size));
  return values;
}

}  // namespace homwave
