#include "gtrs/kernels.hpp"

// Reference kernels. Plain loops, no pragmas: these define the semantics
// the SIMD variants are tested against.
namespace gtrs::kernels::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x,
                 const double* b, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b ? b[r] : 0.0;
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void gemv_transposed_acc_scalar(const double* w, std::size_t rows, std::size_t cols,
                                const double* g, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w + r * cols;
    const double gr = g[r];
    for (std::size_t c = 0; c < cols; ++c) y[c] += gr * row[c];
  }
}

void rank1_acc_scalar(double* w, std::size_t rows, std::size_t cols, const double* g,
                      const double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = w + r * cols;
    const double gr = g[r];
    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot_scalar,  squared_distance_scalar,
                                 axpy_scalar, gemv_scalar,
                                 gemv_transposed_acc_scalar, rank1_acc_scalar};
  return table;
}

}  // namespace gtrs::kernels::detail
