#include "ztc/tensor.hpp"

namespace ztc {

void matmul(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  assert(a.cols == b.rows);
  if (out.rows != a.rows || out.cols != b.cols) out = Tensor(a.rows, b.cols);
  if (!accumulate) out.zero();
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (int k = 0; k < a.cols; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = b.row_ptr(k);
      for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  assert(a.cols == b.cols);
  if (out.rows != a.rows || out.cols != b.rows) out = Tensor(a.rows, b.rows);
  if (!accumulate) out.zero();
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (int j = 0; j < b.rows; ++j) {
      orow[j] += dot(arow, b.row_ptr(j), a.cols);
    }
  }
}

void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  assert(a.rows == b.rows);
  if (out.rows != a.cols || out.cols != b.cols) out = Tensor(a.cols, b.cols);
  if (!accumulate) out.zero();
  for (int n = 0; n < a.rows; ++n) {
    const double* arow = a.row_ptr(n);
    const double* brow = b.row_ptr(n);
    for (int i = 0; i < a.cols; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = out.row_ptr(i);
      for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
    }
  }
}

double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double l2_norm_squared(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data) s += v * v;
  return s;
}

}  // namespace ztc
