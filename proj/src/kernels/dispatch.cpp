#include "gtrs/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace gtrs::kernels {

namespace {

using detail::KernelTable;

bool detect_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend pick_initial_backend() {
  if (const char* env = std::getenv("GTRS_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
    if (std::strcmp(env, "avx2") == 0 && detail::avx2_table() && detect_avx2())
      return Backend::kAvx2;
    if (std::strcmp(env, "avx2") == 0) return Backend::kScalar;
  }
  if (detail::avx2_table() && detect_avx2()) return Backend::kAvx2;
  return Backend::kScalar;
}

struct Dispatch {
  Backend backend;
  const KernelTable* table;
  Dispatch() { set(pick_initial_backend()); }
  void set(Backend b) {
    if (b == Backend::kAvx2 && (!detail::avx2_table() || !detect_avx2()))
      b = Backend::kScalar;
    backend = b;
    table = (b == Backend::kAvx2) ? detail::avx2_table() : &detail::scalar_table();
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

Backend active_backend() { return dispatch().backend; }

const char* backend_name(Backend b) {
  return b == Backend::kAvx2 ? "avx2" : "scalar";
}

bool cpu_supports_avx2() { return detail::avx2_table() != nullptr && detect_avx2(); }

void force_backend(Backend b) { dispatch().set(b); }

double dot(const double* a, const double* b, std::size_t n) {
  return dispatch().table->dot(a, b, n);
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  return dispatch().table->squared_distance(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  dispatch().table->axpy(alpha, x, y, n);
}

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x,
          const double* b, double* y) {
  dispatch().table->gemv(w, rows, cols, x, b, y);
}

void gemv_transposed_acc(const double* w, std::size_t rows, std::size_t cols,
                         const double* g, double* y) {
  dispatch().table->gemv_transposed_acc(w, rows, cols, g, y);
}

void rank1_acc(double* w, std::size_t rows, std::size_t cols, const double* g,
               const double* x) {
  dispatch().table->rank1_acc(w, rows, cols, g, x);
}

}  // namespace gtrs::kernels
