#include "rf/kernels/kernels.hpp"

#include "kernel_variants.hpp"

namespace rf::kernels::scalar {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate)
{
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * lda + p];
            const double* brow = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

double dot(std::size_t n, const double* x, const double* y)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(std::size_t n, double alpha, const double* x, double* y)
{
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

} // namespace rf::kernels::scalar
