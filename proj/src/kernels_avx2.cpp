// AVX2 variants. Built without global -mavx2 so the binary stays runnable on
// older x86-64; each function opts in via the target attribute and is only
// reached after a cpuid check in kernels_dispatch.cpp.
#include "meshfield/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

namespace meshfield::detail {

#define MF_AVX2 __attribute__((target("avx2,fma")))

MF_AVX2 static inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, sh));
}

MF_AVX2 void matvec_avx2(const double* w, const double* bias, const double* x, double* y,
                         int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + size_t(r) * cols;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    int c = 0;
    for (; c + 8 <= cols; c += 8) {
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(x + c), acc0);
      acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c + 4), _mm256_loadu_pd(x + c + 4), acc1);
    }
    for (; c + 4 <= cols; c += 4) {
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(x + c), acc0);
    }
    double acc = hsum4(_mm256_add_pd(acc0, acc1));
    for (; c < cols; ++c) acc += row[c] * x[c];
    y[r] = (bias ? bias[r] : 0.0) + acc;
  }
}

MF_AVX2 void matvec_t_acc_avx2(const double* w, const double* dy, double* dx, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double g = dy[r];
    if (g == 0.0) continue;
    const double* row = w + size_t(r) * cols;
    __m256d gv = _mm256_set1_pd(g);
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d acc = _mm256_loadu_pd(dx + c);
      acc = _mm256_fmadd_pd(gv, _mm256_loadu_pd(row + c), acc);
      _mm256_storeu_pd(dx + c, acc);
    }
    for (; c < cols; ++c) dx[c] += row[c] * g;
  }
}

MF_AVX2 void outer_acc_avx2(double* dw, const double* dy, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double g = dy[r];
    if (g == 0.0) continue;
    double* row = dw + size_t(r) * cols;
    __m256d gv = _mm256_set1_pd(g);
    int c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d acc = _mm256_loadu_pd(row + c);
      acc = _mm256_fmadd_pd(gv, _mm256_loadu_pd(x + c), acc);
      _mm256_storeu_pd(row + c, acc);
    }
    for (; c < cols; ++c) row[c] += g * x[c];
  }
}

MF_AVX2 double dot_avx2(const double* a, const double* b, int n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum4(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

MF_AVX2 void axpy_avx2(double s, const double* x, double* y, int n) {
  __m256d sv = _mm256_set1_pd(s);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_loadu_pd(y + i);
    acc = _mm256_fmadd_pd(sv, _mm256_loadu_pd(x + i), acc);
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) y[i] += s * x[i];
}

#undef MF_AVX2

}  // namespace meshfield::detail

#endif  // x86_64
