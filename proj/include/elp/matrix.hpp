#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "elp/common.hpp"

namespace elp {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) {
    return std::span<double>(data.data() + r * cols, cols);
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data.data() + r * cols, cols);
  }

  bool operator==(const Matrix& o) const = default;
};

// Artifact layout shared by vocabulary centroids, embedding tables and
// canonical wave dumps: <base>.json header + <base>.bin row-major float64
// little-endian payload. `meta` carries caller key/values verbatim.
void save_matrix(const std::string& base_path, const Matrix& m,
                 const std::map<std::string, std::string>& meta = {});
Matrix load_matrix(const std::string& base_path,
                   std::map<std::string, std::string>* meta = nullptr);

// FNV-1a over the raw bytes of the payload; stable fingerprint for manifests.
std::string matrix_content_hash(const Matrix& m);

}  // namespace elp
