#include "meshfield/kernels.hpp"

#include <cstddef>

namespace meshfield::detail {

void matvec_scalar(const double* w, const double* bias, const double* x, double* y,
                   int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + size_t(r) * cols;
    double acc = bias ? bias[r] : 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void matvec_t_acc_scalar(const double* w, const double* dy, double* dx, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + size_t(r) * cols;
    double g = dy[r];
    if (g == 0.0) continue;
    for (int c = 0; c < cols; ++c) dx[c] += row[c] * g;
  }
}

void outer_acc_scalar(double* dw, const double* dy, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = dw + size_t(r) * cols;
    double g = dy[r];
    if (g == 0.0) continue;
    for (int c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

double dot_scalar(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double s, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += s * x[i];
}

}  // namespace meshfield::detail
