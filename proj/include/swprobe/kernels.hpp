#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops of the probe and pooling code. Each kernel has a
// scalar reference and SIMD variants; the variant is chosen once at startup
// from the running CPU and can be overridden (tests compare all variants).
namespace swprobe::kernels {

enum class Isa { Scalar, Avx2, Neon };

struct Table {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot_f64)(const double* a, const double* b, std::size_t n);
  // sum_i x[i] * y[i]
  double (*dot_f32_f64)(const float* x, const double* y, std::size_t n);
  // y += alpha * x
  void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);
  void (*axpy_f32_f64)(double alpha, const float* x, double* y, std::size_t n);
  // acc = max(acc, x) elementwise
  void (*max_f32)(float* acc, const float* x, std::size_t n);
  // acc += x elementwise
  void (*add_f32)(float* acc, const float* x, std::size_t n);
  // Bias-corrected Adam update over n parameters with
  // m_correction = 1 / (1 - beta1^t) and v_correction = 1 / (1 - beta2^t).
  void (*adam_update)(double* params, const double* grads, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2, double eps,
                      double m_correction, double v_correction);
};

const Table& scalar_table();
// Null when the variant is not compiled in or not supported by this CPU.
const Table* avx2_table();
const Table* neon_table();

// The table used by the library.
const Table& active();
// Forces a variant; returns false if it is unavailable.
bool select(Isa isa);
// Restores the CPU-detected default.
void reset();

std::string_view name(Isa isa);

}  // namespace swprobe::kernels
