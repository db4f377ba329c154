#include "meshfield/kernels.hpp"

#include <atomic>

namespace meshfield {

namespace {

std::atomic<bool> g_force_scalar{false};

bool detect_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool use_avx2() {
  static const bool has = detect_avx2();
  return has && !g_force_scalar.load(std::memory_order_relaxed);
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  static const bool has = detect_avx2();
  return has;
#else
  return false;
#endif
}

void force_scalar_kernels(bool on) { g_force_scalar.store(on, std::memory_order_relaxed); }

SimdBackend active_simd_backend() {
  return use_avx2() ? SimdBackend::avx2 : SimdBackend::scalar;
}

void k_matvec(const double* w, const double* bias, const double* x, double* y,
              int rows, int cols) {
#if defined(__x86_64__) || defined(_M_X64)
  if (use_avx2()) return detail::matvec_avx2(w, bias, x, y, rows, cols);
#endif
  detail::matvec_scalar(w, bias, x, y, rows, cols);
}

void k_matvec_t_acc(const double* w, const double* dy, double* dx, int rows, int cols) {
#if defined(__x86_64__) || defined(_M_X64)
  if (use_avx2()) return detail::matvec_t_acc_avx2(w, dy, dx, rows, cols);
#endif
  detail::matvec_t_acc_scalar(w, dy, dx, rows, cols);
}

void k_outer_acc(double* dw, const double* dy, const double* x, int rows, int cols) {
#if defined(__x86_64__) || defined(_M_X64)
  if (use_avx2()) return detail::outer_acc_avx2(dw, dy, x, rows, cols);
#endif
  detail::outer_acc_scalar(dw, dy, x, rows, cols);
}

double k_dot(const double* a, const double* b, int n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (use_avx2()) return detail::dot_avx2(a, b, n);
#endif
  return detail::dot_scalar(a, b, n);
}

void k_axpy(double s, const double* x, double* y, int n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (use_avx2()) return detail::axpy_avx2(s, x, y, n);
#endif
  detail::axpy_scalar(s, x, y, n);
}

}  // namespace meshfield
