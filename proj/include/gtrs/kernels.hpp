#pragma once

#include <cstddef>

// Dense double-precision kernels behind the learned components, the
// clustering step and the metric sweeps. Scalar reference implementations
// are always built; an AVX2+FMA variant is selected at startup when the
// CPU supports it. The two backends are equivalence-tested against each
// other; within one process the selected backend never changes, so
// repeated runs on the same machine stay bit-identical.
namespace gtrs::kernels {

enum class Backend { kScalar, kAvx2 };

// Backend chosen at first use: AVX2 when the CPU supports it, unless the
// GTRS_KERNELS environment variable ("scalar" / "avx2") overrides.
Backend active_backend();
const char* backend_name(Backend b);
bool cpu_supports_avx2();

// Test hook. Forcing kAvx2 on a CPU without it falls back to scalar.
void force_backend(Backend b);

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

// sum_i (a[i] - b[i])^2
double squared_distance(const double* a, const double* b, std::size_t n);

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);

// y = W x + b with W row-major (rows x cols); pass b = nullptr for y = W x.
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x,
          const double* b, double* y);

// y[c] += sum_r W[r][c] * g[r]  (input gradient of a linear layer)
void gemv_transposed_acc(const double* w, std::size_t rows, std::size_t cols,
                         const double* g, double* y);

// W[r][c] += g[r] * x[c]  (weight gradient of a linear layer)
void rank1_acc(double* w, std::size_t rows, std::size_t cols, const double* g,
               const double* x);

namespace detail {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*gemv)(const double*, std::size_t, std::size_t, const double*, const double*, double*);
  void (*gemv_transposed_acc)(const double*, std::size_t, std::size_t, const double*, double*);
  void (*rank1_acc)(double*, std::size_t, std::size_t, const double*, const double*);
};

const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in

}  // namespace detail

}  // namespace gtrs::kernels
