#include "rf/kernels/kernels.hpp"

#include "kernel_variants.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace rf::kernels {

namespace {

const KernelTable kScalar{"scalar", &scalar::gemm, &scalar::dot, &scalar::axpy};

#if RF_HAVE_AVX2
const KernelTable kAvx2{"avx2", &avx2::gemm, &avx2::dot, &avx2::axpy};
#endif

const KernelTable* select_default()
{
    const char* env = std::getenv("RF_KERNELS");
    const std::string_view want = env ? env : "";
    if (want == "scalar") return &kScalar;
    if (const KernelTable* t = avx2_table()) return t;
    return &kScalar;
}

std::atomic<const KernelTable*>& active_slot()
{
    static std::atomic<const KernelTable*> slot{select_default()};
    return slot;
}

} // namespace

const KernelTable& scalar_table() { return kScalar; }

bool cpu_has_avx2_fma()
{
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* avx2_table()
{
#if RF_HAVE_AVX2
    static const bool ok = cpu_has_avx2_fma();
    return ok ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_active(const KernelTable& table) { active_slot().store(&table, std::memory_order_release); }

} // namespace rf::kernels
