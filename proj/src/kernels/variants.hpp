#pragma once

#include "swprobe/kernels.hpp"

namespace swprobe::kernels {

// Scalar loops, reused by the SIMD variants for their tails.
namespace scalar {
double dot_f64(const double* a, const double* b, std::size_t n);
double dot_f32_f64(const float* x, const double* y, std::size_t n);
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);
void axpy_f32_f64(double alpha, const float* x, double* y, std::size_t n);
void max_f32(float* acc, const float* x, std::size_t n);
void add_f32(float* acc, const float* x, std::size_t n);
void adam_update(double* params, const double* grads, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps, double m_correction,
                 double v_correction);
}  // namespace scalar

#if defined(SWPROBE_HAVE_AVX2)
const Table& avx2_table_unchecked();
#endif
#if defined(SWPROBE_HAVE_NEON)
const Table& neon_table_unchecked();
#endif

}  // namespace swprobe::kernels
