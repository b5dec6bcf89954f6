// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <cstddef>
#include <vector>

namespace durhaz {

/// Dense row-major matrix of doubles. Just enough linear algebra for the
/// network code; nothing here is clever.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// y += M x
inline void matvec_accumulate(const Matrix& m, const double* x, double* y) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* wr = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

/// y += M^T x  (x has m.rows() entries, y has m.cols())
inline void matvec_transpose_accumulate(const Matrix& m, const double* x, double* y) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* wr = m.row(r);
    const double xr = x[r];
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += wr[c] * xr;
  }
}

/// M += a b^T (outer product accumulate)
inline void outer_accumulate(Matrix& m, const double* a, const double* b) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double* wr = m.row(r);
    const double ar = a[r];
    for (std::size_t c = 0; c < m.cols(); ++c) wr[c] += ar * b[c];
  }
}

}  // namespace durhaz
