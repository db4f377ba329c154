#pragma once

namespace meshfield {

// Dense kernels behind runtime CPU dispatch. Scalar variants are the reference
// semantics; the AVX2 variants may reassociate sums and contract to FMA, so
// cross-backend comparisons are tolerance-based, not bitwise.
enum class SimdBackend { scalar, avx2 };

bool cpu_has_avx2();
// Test hook: pins every kernel to the scalar reference path.
void force_scalar_kernels(bool on);
SimdBackend active_simd_backend();

// y[r] = bias[r] + sum_c w[r * cols + c] * x[c]        (w row-major, rows x cols)
void k_matvec(const double* w, const double* bias, const double* x, double* y,
              int rows, int cols);

// dx[c] += sum_r w[r * cols + c] * dy[r]
void k_matvec_t_acc(const double* w, const double* dy, double* dx, int rows, int cols);

// dw[r * cols + c] += dy[r] * x[c]
void k_outer_acc(double* dw, const double* dy, const double* x, int rows, int cols);

double k_dot(const double* a, const double* b, int n);

// y[i] += s * x[i]
void k_axpy(double s, const double* x, double* y, int n);

namespace detail {
void matvec_scalar(const double* w, const double* bias, const double* x, double* y,
                   int rows, int cols);
void matvec_t_acc_scalar(const double* w, const double* dy, double* dx, int rows, int cols);
void outer_acc_scalar(double* dw, const double* dy, const double* x, int rows, int cols);
double dot_scalar(const double* a, const double* b, int n);
void axpy_scalar(double s, const double* x, double* y, int n);

#if defined(__x86_64__) || defined(_M_X64)
void matvec_avx2(const double* w, const double* bias, const double* x, double* y,
                 int rows, int cols);
void matvec_t_acc_avx2(const double* w, const double* dy, double* dx, int rows, int cols);
void outer_acc_avx2(double* dw, const double* dy, const double* x, int rows, int cols);
double dot_avx2(const double* a, const double* b, int n);
void axpy_avx2(double s, const double* x, double* y, int n);
#endif
}  // namespace detail

}  // namespace meshfield
