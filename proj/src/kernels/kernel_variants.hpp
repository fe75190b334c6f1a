#pragma once

#include <cstddef>

namespace rf::kernels::scalar {
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
} // namespace rf::kernels::scalar

#if RF_HAVE_AVX2
namespace rf::kernels::avx2 {
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
} // namespace rf::kernels::avx2
#endif
