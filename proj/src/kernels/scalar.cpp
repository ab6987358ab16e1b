#include "swprobe/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "variants.hpp"

namespace swprobe::kernels::scalar {

double dot_f64(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dot_f32_f64(const float* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * y[i];
  return acc;
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f32_f64(double alpha, const float* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * static_cast<double>(x[i]);
}

void max_f32(float* acc, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = std::max(acc[i], x[i]);
}

void add_f32(float* acc, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i];
}

void adam_update(double* params, const double* grads, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps, double m_correction,
                 double v_correction) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g * g);
    const double m_hat = m[i] * m_correction;
    const double v_hat = v[i] * v_correction;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace swprobe::kernels::scalar

namespace swprobe::kernels {

const Table& scalar_table() {
  static const Table table{Isa::Scalar,        scalar::dot_f64, scalar::dot_f32_f64,
                           scalar::axpy_f64,   scalar::axpy_f32_f64,
                           scalar::max_f32,    scalar::add_f32, scalar::adam_update};
  return table;
}

}  // namespace swprobe::kernels
