#include "omib/simd/dispatch.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace omib::simd {
namespace {

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* initial_table() {
  if (const char* env = std::getenv("OMIB_ISA"); env != nullptr && *env != '\0') {
    auto isa = parse_isa(env);
    if (!isa) {
      throw std::invalid_argument(std::string("OMIB_ISA: unknown instruction set '") + env + "'");
    }
    return &kernels_for(*isa);
  }
  return &kernels_for(best_isa());
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
#if defined(OMIB_HAVE_X86_KERNELS)
    case Isa::avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::avx512:
      return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("fma");
#else
    case Isa::avx2:
    case Isa::avx512:
      return false;
#endif
  }
  return false;
}

Isa best_isa() {
  if (isa_supported(Isa::avx512)) return Isa::avx512;
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  return Isa::scalar;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("instruction set " + std::string(isa_name(isa)) +
                                " is not supported on this host");
  }
  switch (isa) {
#if defined(OMIB_HAVE_X86_KERNELS)
    case Isa::avx2:
      return detail::avx2_table();
    case Isa::avx512:
      return detail::avx512_table();
#endif
    default:
      return detail::scalar_table();
  }
}

const KernelTable& kernels() {
  const KernelTable* table = g_active.load(std::memory_order_acquire);
  if (table == nullptr) {
    const KernelTable* chosen = initial_table();
    const KernelTable* expected = nullptr;
    g_active.compare_exchange_strong(expected, chosen, std::memory_order_acq_rel);
    table = g_active.load(std::memory_order_acquire);
  }
  return *table;
}

void set_active_isa(Isa isa) { g_active.store(&kernels_for(isa), std::memory_order_release); }

Isa active_isa() { return kernels().isa; }

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::avx512:
      return "avx512";
  }
  return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "avx512") return Isa::avx512;
  return std::nullopt;
}

}  // namespace omib::simd
