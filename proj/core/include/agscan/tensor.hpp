#pragma once

#include <cstddef>
#include <vector>

#include "agscan/errors.hpp"

namespace agscan {

// Dense row-major f64 matrix. All kernels below use fixed left-to-right
// summation order so repeated runs are bit-identical.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

struct Vector {
  std::vector<double> data;

  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data(dim, fill) {}
  Vector(std::initializer_list<double> init) : data(init) {}

  std::size_t dim() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

Matrix matmul(const Matrix& a, const Matrix& b);

// y += x * m, for a single row vector x (dim = m.rows), y dim = m.cols.
void add_vec_matmul(const double* x, const Matrix& m, double* y);

Vector softmax(const Vector& v);
Vector log_softmax(const Vector& v);
double logsumexp(const Vector& v);

Vector layer_norm(const Vector& v, const Vector& gain, const Vector& bias, double eps);

double gelu_scalar(double x);
double gelu_derivative(double x);
Vector gelu(const Vector& v);

// -log softmax(logits)[target]
double cross_entropy(const Vector& logits, std::size_t target);

bool all_finite(const std::vector<double>& values);

}  // namespace agscan
