// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_MATRIX_HPP_
#define HETPART_MATRIX_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "hetpart/errors.hpp"

namespace hetpart {

// Dense row-major float matrix. Deliberately minimal: the training engine
// only needs matmul, transpose and elementwise access.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0f) {}

  float& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  float operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// c = a * b with 32-bit accumulation. The k loop is innermost-per-output in
// ascending order, so each output element sees a fixed, reproducible
// summation order regardless of compiler.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols) +
                         " vs " + std::to_string(b.rows) + ")");
  }
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const float* arow = &a.data[static_cast<std::size_t>(i) * a.cols];
    float* crow = &c.data[static_cast<std::size_t>(i) * b.cols];
    for (int k = 0; k < a.cols; ++k) {
      // No zero-skip shortcut: 0 * Inf must still yield NaN so that overflow
      // in narrowed operands is visible to the loss-scaling logic.
      const float aik = arow[k];
      const float* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) {
        crow[j] += aik * brow[j];
      }
    }
  }
  return c;
}

inline Matrix transposed(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) {
      t(j, i) = a(i, j);
    }
  }
  return t;
}

// Index of the first maximal element in row r.
inline int argmax_row(const Matrix& a, int r) {
  int best = 0;
  for (int j = 1; j < a.cols; ++j) {
    if (a(r, j) > a(r, best)) best = j;
  }
  return best;
}

}  // namespace hetpart

#endif  // HETPART_MATRIX_HPP_
