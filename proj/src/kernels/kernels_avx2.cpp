// AVX2 + FMA variants of the dense kernels. Compiled with -mavx2 -mfma on
// x86-64 only; dispatch.cpp checks cpu support before handing out this
// table. Accumulation order differs from the scalar reference (4-lane
// partial sums), so equality with scalar is up to rounding, not bitwise.
#include "gtrs/kernels.hpp"

#if defined(GTRS_HAVE_AVX2)

#include <immintrin.h>

namespace gtrs::kernels::detail {

namespace {

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_avx2(const double* w, std::size_t rows, std::size_t cols, const double* x,
               const double* b, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = (b ? b[r] : 0.0) + dot_avx2(w + r * cols, x, cols);
  }
}

void gemv_transposed_acc_avx2(const double* w, std::size_t rows, std::size_t cols,
                              const double* g, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    axpy_avx2(g[r], w + r * cols, y, cols);
  }
}

void rank1_acc_avx2(double* w, std::size_t rows, std::size_t cols, const double* g,
                    const double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    axpy_avx2(g[r], x, w + r * cols, cols);
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{dot_avx2,  squared_distance_avx2,
                                 axpy_avx2, gemv_avx2,
                                 gemv_transposed_acc_avx2, rank1_acc_avx2};
  return &table;
}

}  // namespace gtrs::kernels::detail

#else

namespace gtrs::kernels::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace gtrs::kernels::detail

#endif  // GTRS_HAVE_AVX2
