#pragma once

#include <cstddef>
#include <string_view>

namespace rf::kernels {

// C[M,N] = (accumulate ? C : 0) + A[M,K] * B[K,N], all row-major with leading dimensions.
using GemmFn = void (*)(std::size_t m, std::size_t n, std::size_t k,
                        const double* a, std::size_t lda,
                        const double* b, std::size_t ldb,
                        double* c, std::size_t ldc, bool accumulate);
using DotFn = double (*)(std::size_t n, const double* x, const double* y);
// y += alpha * x
using AxpyFn = void (*)(std::size_t n, double alpha, const double* x, double* y);

struct KernelTable {
    std::string_view name;
    GemmFn gemm;
    DotFn dot;
    AxpyFn axpy;
};

const KernelTable& scalar_table();

// Null when the build or the host CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

bool cpu_has_avx2_fma();

// Chosen once at first use: the widest supported table, unless the
// RF_KERNELS environment variable names another ("scalar" or "avx2").
const KernelTable& active();

// Overrides the active table; intended for tests and benchmarks.
void set_active(const KernelTable& table);

inline void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate)
{
    active().gemm(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

inline double dot(std::size_t n, const double* x, const double* y) { return active().dot(n, x, y); }

inline void axpy(std::size_t n, double alpha, const double* x, double* y) { active().axpy(n, alpha, x, y); }

} // namespace rf::kernels
