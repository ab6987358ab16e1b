// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "variants.hpp"

namespace swprobe::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double res = hsum(_mm256_add_pd(acc0, acc1));
  return res + scalar::dot_f64(a + i, b + i, n - i);
}

double dot_f32_f64(const float* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 xf = _mm256_loadu_ps(x + i);
    __m256d x0 = _mm256_cvtps_pd(_mm256_castps256_ps128(xf));
    __m256d x1 = _mm256_cvtps_pd(_mm256_extractf128_ps(xf, 1));
    acc0 = _mm256_fmadd_pd(x0, _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(x1, _mm256_loadu_pd(y + i + 4), acc1);
  }
  double res = hsum(_mm256_add_pd(acc0, acc1));
  return res + scalar::dot_f32_f64(x + i, y + i, n - i);
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  scalar::axpy_f64(alpha, x + i, y + i, n - i);
}

void axpy_f32_f64(double alpha, const float* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xv = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, xv, _mm256_loadu_pd(y + i)));
  }
  scalar::axpy_f32_f64(alpha, x + i, y + i, n - i);
}

void max_f32(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    // Operand order matches std::max(acc, x): acc is kept unless x > acc.
    __m256 a = _mm256_loadu_ps(acc + i);
    __m256 b = _mm256_loadu_ps(x + i);
    _mm256_storeu_ps(acc + i, _mm256_blendv_ps(a, b, _mm256_cmp_ps(a, b, _CMP_LT_OQ)));
  }
  scalar::max_f32(acc + i, x + i, n - i);
}

void add_f32(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(acc + i, _mm256_add_ps(_mm256_loadu_ps(acc + i), _mm256_loadu_ps(x + i)));
  }
  scalar::add_f32(acc + i, x + i, n - i);
}

void adam_update(double* params, const double* grads, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps, double m_correction,
                 double v_correction) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d one_b1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d one_b2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d mc = _mm256_set1_pd(m_correction);
  const __m256d vc = _mm256_set1_pd(v_correction);
  const __m256d lr_v = _mm256_set1_pd(lr);
  const __m256d eps_v = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d g = _mm256_loadu_pd(grads + i);
    __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(one_b1, g));
    __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(one_b2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, vc)), eps_v);
    __m256d step = _mm256_div_pd(_mm256_mul_pd(lr_v, _mm256_mul_pd(mi, mc)), denom);
    _mm256_storeu_pd(params + i, _mm256_sub_pd(_mm256_loadu_pd(params + i), step));
  }
  scalar::adam_update(params + i, grads + i, m + i, v + i, n - i, lr, beta1, beta2, eps,
                      m_correction, v_correction);
}

}  // namespace
}  // namespace swprobe::kernels::avx2

namespace swprobe::kernels {

const Table& avx2_table_unchecked() {
  static const Table table{Isa::Avx2,          avx2::dot_f64, avx2::dot_f32_f64,
                           avx2::axpy_f64,     avx2::axpy_f32_f64,
                           avx2::max_f32,      avx2::add_f32, avx2::adam_update};
  return table;
}

}  // namespace swprobe::kernels
