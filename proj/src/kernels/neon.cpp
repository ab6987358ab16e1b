#include <arm_neon.h>

#include "variants.hpp"

namespace swprobe::kernels::neon {
namespace {

double dot_f64(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double res = vaddvq_f64(vaddq_f64(acc0, acc1));
  return res + scalar::dot_f64(a + i, b + i, n - i);
}

double dot_f32_f64(const float* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t xf = vld1q_f32(x + i);
    acc0 = vfmaq_f64(acc0, vcvt_f64_f32(vget_low_f32(xf)), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vcvt_high_f64_f32(xf), vld1q_f64(y + i + 2));
  }
  double res = vaddvq_f64(vaddq_f64(acc0, acc1));
  return res + scalar::dot_f32_f64(x + i, y + i, n - i);
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), a, vld1q_f64(x + i)));
  scalar::axpy_f64(alpha, x + i, y + i, n - i);
}

void axpy_f32_f64(double alpha, const float* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), a, vcvt_f64_f32(vld1_f32(x + i))));
  }
  scalar::axpy_f32_f64(alpha, x + i, y + i, n - i);
}

void max_f32(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t a = vld1q_f32(acc + i);
    float32x4_t b = vld1q_f32(x + i);
    vst1q_f32(acc + i, vbslq_f32(vcltq_f32(a, b), b, a));
  }
  scalar::max_f32(acc + i, x + i, n - i);
}

void add_f32(float* acc, const float* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(acc + i, vaddq_f32(vld1q_f32(acc + i), vld1q_f32(x + i)));
  scalar::add_f32(acc + i, x + i, n - i);
}

void adam_update(double* params, const double* grads, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps, double m_correction,
                 double v_correction) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t g = vld1q_f64(grads + i);
    float64x2_t mi = vaddq_f64(vmulq_n_f64(vld1q_f64(m + i), beta1), vmulq_n_f64(g, 1.0 - beta1));
    float64x2_t vi =
        vaddq_f64(vmulq_n_f64(vld1q_f64(v + i), beta2), vmulq_n_f64(vmulq_f64(g, g), 1.0 - beta2));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    float64x2_t denom = vaddq_f64(vsqrtq_f64(vmulq_n_f64(vi, v_correction)), vdupq_n_f64(eps));
    float64x2_t step = vdivq_f64(vmulq_n_f64(vmulq_n_f64(mi, m_correction), lr), denom);
    vst1q_f64(params + i, vsubq_f64(vld1q_f64(params + i), step));
  }
  scalar::adam_update(params + i, grads + i, m + i, v + i, n - i, lr, beta1, beta2, eps,
                      m_correction, v_correction);
}

}  // namespace
}  // namespace swprobe::kernels::neon

namespace swprobe::kernels {

const Table& neon_table_unchecked() {
  static const Table table{Isa::Neon,          neon::dot_f64, neon::dot_f32_f64,
                           neon::axpy_f64,     neon::axpy_f32_f64,
                           neon::max_f32,      neon::add_f32, neon::adam_update};
  return table;
}

}  // namespace swprobe::kernels
