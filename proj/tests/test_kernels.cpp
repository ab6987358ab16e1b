#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "swprobe/kernels.hpp"

using namespace swprobe;

namespace {

std::vector<const kernels::Table*> variants() {
  std::vector<const kernels::Table*> out;
  if (auto* t = kernels::avx2_table()) out.push_back(t);
  if (auto* t = kernels::neon_table()) out.push_back(t);
  return out;
}

// Reductions may reassociate; elementwise kernels must match exactly.
bool close(double a, double b, double scale) { return std::abs(a - b) <= 1e-12 * std::max(1.0, scale); }

}  // namespace

TEST_CASE("every SIMD variant agrees with the scalar kernels") {
  const auto& ref = kernels::scalar_table();
  std::mt19937_64 e(17);
  std::normal_distribution<double> g;
  MESSAGE("variants available: " << variants().size());
  for (const auto* t : variants()) {
    for (std::size_t n = 0; n <= 70; ++n) {
      std::vector<double> a(n), b(n);
      std::vector<float> x(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = g(e);
        b[i] = g(e);
        x[i] = float(g(e));
        y[i] = float(g(e));
      }
      double scale = 0;
      for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]) + std::abs(double(x[i]) * b[i]);
      CHECK(close(t->dot_f64(a.data(), b.data(), n), ref.dot_f64(a.data(), b.data(), n), scale));
      CHECK(close(t->dot_f32_f64(x.data(), b.data(), n), ref.dot_f32_f64(x.data(), b.data(), n), scale));

      auto y1 = b, y2 = b;
      t->axpy_f64(0.37, a.data(), y1.data(), n);
      ref.axpy_f64(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i], 1.0));
      y1 = b, y2 = b;
      t->axpy_f32_f64(-1.5, x.data(), y1.data(), n);
      ref.axpy_f32_f64(-1.5, x.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i], 1.0));

      auto m1 = x, m2 = x;
      t->max_f32(m1.data(), y.data(), n);
      ref.max_f32(m2.data(), y.data(), n);
      CHECK(m1 == m2);
      m1 = x, m2 = x;
      t->add_f32(m1.data(), y.data(), n);
      ref.add_f32(m2.data(), y.data(), n);
      CHECK(m1 == m2);

      std::vector<double> p1 = a, p2 = a, mm1(n), mm2(n), v1(n), v2(n);
      for (std::size_t i = 0; i < n; ++i) mm1[i] = mm2[i] = 0.1 * g(e), v1[i] = v2[i] = std::abs(g(e));
      for (int step = 1; step <= 3; ++step) {
        const double mc = 1 / (1 - std::pow(0.9, step)), vc = 1 / (1 - std::pow(0.999, step));
        t->adam_update(p1.data(), b.data(), mm1.data(), v1.data(), n, 1e-3, 0.9, 0.999, 1e-8, mc, vc);
        ref.adam_update(p2.data(), b.data(), mm2.data(), v2.data(), n, 1e-3, 0.9, 0.999, 1e-8, mc, vc);
      }
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(close(p1[i], p2[i], 1.0));
        CHECK(close(mm1[i], mm2[i], 1.0));
        CHECK(close(v1[i], v2[i], 1.0));
      }
    }
  }
}

TEST_CASE("max kernel on an odd length with ties") {
  const auto& ref = kernels::scalar_table();
  for (const auto* t : variants()) {
    std::vector<float> acc(19, 1.0f), x(19, 1.0f), acc2(19, 1.0f);
    for (std::size_t i = 0; i < 19; i += 2) x[i] = 2.0f;
    t->max_f32(acc.data(), x.data(), 19);
    ref.max_f32(acc2.data(), x.data(), 19);
    CHECK(acc == acc2);
  }
}

TEST_CASE("selection") {
  CHECK(kernels::select(kernels::Isa::Scalar));
  CHECK(kernels::active().isa == kernels::Isa::Scalar);
  if (kernels::avx2_table()) {
    CHECK(kernels::select(kernels::Isa::Avx2));
    CHECK(kernels::active().isa == kernels::Isa::Avx2);
  } else {
    CHECK_FALSE(kernels::select(kernels::Isa::Avx2));
  }
  kernels::reset();
  CHECK(kernels::name(kernels::Isa::Scalar) == "scalar");
}
