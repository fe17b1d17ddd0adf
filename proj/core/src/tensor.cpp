#include "agscan/tensor.hpp"

#include <cmath>

namespace agscan {

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, "matmul: inner dimensions mismatch");
  Matrix out(a.rows, b.cols);
  // i-k-j loop order keeps the inner loop contiguous in both b and out while
  // the per-element summation order stays fixed (k ascending).
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

void add_vec_matmul(const double* x, const Matrix& m, double* y) {
  for (std::size_t k = 0; k < m.rows; ++k) {
    const double xk = x[k];
    const double* mrow = m.row(k);
    for (std::size_t j = 0; j < m.cols; ++j) y[j] += xk * mrow[j];
  }
}

Vector softmax(const Vector& v) {
  require(v.dim() > 0, "softmax: empty input");
  double mx = v[0];
  for (std::size_t i = 1; i < v.dim(); ++i) mx = std::max(mx, v[i]);
  Vector out(v.dim());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] /= sum;
  return out;
}

double logsumexp(const Vector& v) {
  require(v.dim() > 0, "logsumexp: empty input");
  double mx = v[0];
  for (std::size_t i = 1; i < v.dim(); ++i) mx = std::max(mx, v[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < v.dim(); ++i) sum += std::exp(v[i] - mx);
  return mx + std::log(sum);
}

Vector log_softmax(const Vector& v) {
  const double lse = logsumexp(v);
  Vector out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] = v[i] - lse;
  return out;
}

Vector layer_norm(const Vector& v, const Vector& gain, const Vector& bias, double eps) {
  require(v.dim() == gain.dim() && v.dim() == bias.dim(), "layer_norm: dimension mismatch");
  require(eps > 0.0, "layer_norm: eps must be positive");
  const std::size_t n = v.dim();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += v[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + eps);
  Vector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (v[i] - mean) * inv * gain[i] + bias[i];
  return out;
}

double gelu_scalar(double x) {
  // Exact erf form x * Phi(x), not the tanh approximation.
  return x * 0.5 * (1.0 + std::erf(x * 0.70710678118654752440084436210485));
}

double gelu_derivative(double x) {
  const double phi_cdf = 0.5 * (1.0 + std::erf(x * 0.70710678118654752440084436210485));
  const double phi_pdf = std::exp(-0.5 * x * x) * 0.39894228040143267793994605993438;
  return phi_cdf + x * phi_pdf;
}

Vector gelu(const Vector& v) {
  Vector out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] = gelu_scalar(v[i]);
  return out;
}

double cross_entropy(const Vector& logits, std::size_t target) {
  require(target < logits.dim(), "cross_entropy: target index out of range");
  return logsumexp(logits) - logits[target];
}

bool all_finite(const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace agscan
