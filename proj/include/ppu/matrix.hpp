#ifndef PPU_MATRIX_HPP
#define PPU_MATRIX_HPP

#include <cstddef>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "ppu/errors.hpp"

namespace ppu {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

inline Matrix select_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= m.rows) throw IndexError("row index " + std::to_string(idx[i]) + " out of range");
    std::memcpy(out.data.data() + i * m.cols, m.data.data() + idx[i] * m.cols, m.cols * sizeof(double));
  }
  return out;
}

// Byte-for-byte comparison; distinguishes -0.0 from 0.0 and compares NaN payloads.
inline bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && bitwise_equal(a.data, b.data);
}

}  // namespace ppu

#endif  // PPU_MATRIX_HPP
