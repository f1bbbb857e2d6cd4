#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hyre::nn {

// Dense row-major matrix of doubles. The workhorse container for inputs,
// parameters, and head predictions.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0);
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }

  std::size_t size() const { return rows * cols; }
  bool all_finite() const;
};

bool approx_equal(const Matrix& a, const Matrix& b, double tol);

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T  (B given as rows of the right factor's transpose)
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// throws invalid_argument naming `what` if shapes differ
void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                   const char* what);

}  // namespace hyre::nn
