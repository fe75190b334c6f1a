// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "rf/kernels/kernels.hpp"

#include "kernel_variants.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace rf::kernels::avx2 {

namespace {

constexpr std::size_t kColumnBlock = 256;

// Every output element is an fma chain over p in ascending order, whatever
// tile it lands in, so the result does not depend on how rows are split.
inline void tile_4x8(std::size_t k, const double* a, std::size_t lda, const double* b, std::size_t ldb,
                     double* c, std::size_t ldc, bool accumulate)
{
    __m256d c00, c01, c10, c11, c20, c21, c30, c31;
    if (accumulate) {
        c00 = _mm256_loadu_pd(c + 0 * ldc);
        c01 = _mm256_loadu_pd(c + 0 * ldc + 4);
        c10 = _mm256_loadu_pd(c + 1 * ldc);
        c11 = _mm256_loadu_pd(c + 1 * ldc + 4);
        c20 = _mm256_loadu_pd(c + 2 * ldc);
        c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
        c30 = _mm256_loadu_pd(c + 3 * ldc);
        c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
    } else {
        c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_pd();
    }
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
        const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
        __m256d av = _mm256_broadcast_sd(a + 0 * lda + p);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a + 1 * lda + p);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a + 2 * lda + p);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a + 3 * lda + p);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    _mm256_storeu_pd(c + 0 * ldc, c00);
    _mm256_storeu_pd(c + 0 * ldc + 4, c01);
    _mm256_storeu_pd(c + 1 * ldc, c10);
    _mm256_storeu_pd(c + 1 * ldc + 4, c11);
    _mm256_storeu_pd(c + 2 * ldc, c20);
    _mm256_storeu_pd(c + 2 * ldc + 4, c21);
    _mm256_storeu_pd(c + 3 * ldc, c30);
    _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

inline void tile_1x4(std::size_t k, const double* a, const double* b, std::size_t ldb, double* c, bool accumulate)
{
    __m256d acc = accumulate ? _mm256_loadu_pd(c) : _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p)
        acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * ldb), acc);
    _mm256_storeu_pd(c, acc);
}

inline void tile_1x1(std::size_t k, const double* a, const double* b, std::size_t ldb, double* c, bool accumulate)
{
    double acc = accumulate ? *c : 0.0;
    for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[p], b[p * ldb], acc);
    *c = acc;
}

} // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate)
{
    for (std::size_t j0 = 0; j0 < n; j0 += kColumnBlock) {
        const std::size_t jn = std::min(n, j0 + kColumnBlock);
        std::size_t i = 0;
        for (; i + 4 <= m; i += 4) {
            std::size_t j = j0;
            for (; j + 8 <= jn; j += 8) tile_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc, accumulate);
            for (std::size_t r = i; r < i + 4; ++r) {
                std::size_t jj = j;
                for (; jj + 4 <= jn; jj += 4) tile_1x4(k, a + r * lda, b + jj, ldb, c + r * ldc + jj, accumulate);
                for (; jj < jn; ++jj) tile_1x1(k, a + r * lda, b + jj, ldb, c + r * ldc + jj, accumulate);
            }
        }
        for (; i < m; ++i) {
            std::size_t j = j0;
            for (; j + 4 <= jn; j += 4) tile_1x4(k, a + i * lda, b + j, ldb, c + i * ldc + j, accumulate);
            for (; j < jn; ++j) tile_1x1(k, a + i * lda, b + j, ldb, c + i * ldc + j, accumulate);
        }
    }
}

double dot(std::size_t n, const double* x, const double* y)
{
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd(), s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
        s2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), s2);
        s3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), s3);
    }
    for (; i + 4 <= n; i += 4) s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    const __m256d s = _mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, s);
    double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) total = std::fma(x[i], y[i], total);
    return total;
}

void axpy(std::size_t n, double alpha, const double* x, double* y)
{
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i + 4, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

} // namespace rf::kernels::avx2
