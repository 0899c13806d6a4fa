#include "gckn/simd.hpp"

namespace gckn::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sqdist_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_rows_scalar(const double* rows, std::size_t n_rows, std::size_t dim, const double* x, double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot_scalar(rows + r * dim, x, dim);
}

void row_sqdist_scalar(const double* rows, std::size_t n_rows, std::size_t dim, const double* x, double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = sqdist_scalar(rows + r * dim, x, dim);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar, dot_scalar, sqdist_scalar, axpy_scalar, gemv_rows_scalar,
                                 row_sqdist_scalar};
  return table;
}

}  // namespace gckn::simd::detail
