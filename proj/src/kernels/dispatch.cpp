#include <atomic>

#include "swprobe/kernels.hpp"
#include "variants.hpp"

namespace swprobe::kernels {
namespace {

const Table& detect() {
  if (const Table* t = avx2_table()) return *t;
  if (const Table* t = neon_table()) return *t;
  return scalar_table();
}

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> table{&detect()};
  return table;
}

}  // namespace

const Table* avx2_table() {
#if defined(SWPROBE_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const Table* neon_table() {
#if defined(SWPROBE_HAVE_NEON)
  // NEON is mandatory on AArch64.
  return &neon_table_unchecked();
#else
  return nullptr;
#endif
}

const Table& active() { return *current().load(std::memory_order_acquire); }

bool select(Isa isa) {
  const Table* t = nullptr;
  switch (isa) {
    case Isa::Scalar: t = &scalar_table(); break;
    case Isa::Avx2: t = avx2_table(); break;
    case Isa::Neon: t = neon_table(); break;
  }
  if (t == nullptr) return false;
  current().store(t, std::memory_order_release);
  return true;
}

void reset() { current().store(&detect(), std::memory_order_release); }

std::string_view name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

}  // namespace swprobe::kernels
