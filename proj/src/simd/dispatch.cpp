#include <atomic>
#include <cstdlib>
#include <string>

#include "gckn/simd.hpp"

namespace gckn::simd {

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(GCKN_HAVE_AVX2_VARIANT) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

const KernelTable& kernels_for(Isa isa) {
#if defined(GCKN_HAVE_AVX2_VARIANT)
  if (isa == Isa::avx2 && isa_available(Isa::avx2)) return detail::avx2_table();
#endif
  (void)isa;
  return detail::scalar_table();
}

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("GCKN_SIMD")) {
    if (std::string(env) == "scalar") return Isa::scalar;
  }
  return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&kernels_for(initial_isa())};
  return slot;
}

}  // namespace

const KernelTable& kernels() { return *active_slot().load(std::memory_order_acquire); }

void set_active_isa(Isa isa) { active_slot().store(&kernels_for(isa), std::memory_order_release); }

Isa active_isa() { return kernels().isa; }

}  // namespace gckn::simd
