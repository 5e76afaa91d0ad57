#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

namespace ztc {

// Dense row-major matrix of doubles. Vectors are 1 x n tensors.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  static Tensor row(int n) { return Tensor(1, n); }

  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  double* row_ptr(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const double* row_ptr(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

  size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

// A tensor tagged with its parameter name, for optimizers, checkpoints and
// gradient sweeps.
struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

// out (n x m) = a (n x k) * b (k x m). Accumulates when accumulate is true.
void matmul(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate = false);
// out (n x m) = a (n x k) * b^T (m x k).
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate = false);
// out (k x m) = a^T (n x k) * b (n x m).
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate = false);

double dot(const double* a, const double* b, int n);

double l2_norm_squared(const Tensor& t);

}  // namespace ztc
