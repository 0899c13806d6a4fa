#pragma once

// Data-parallel inner loops used by the Nystrom layers and K-means.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is chosen once at startup from CPUID; the
// GCKN_SIMD environment variable ("scalar" or "avx2") overrides the choice.
// Results of the two variants agree up to floating-point reassociation.

#include <cstddef>
#include <span>
#include <string_view>

namespace gckn::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = <rows[i, :], x> for a row-major (n_rows x dim) block.
  void (*gemv_rows)(const double* rows, std::size_t n_rows, std::size_t dim, const double* x, double* out);
  // out[i] = ||rows[i, :] - x||^2
  void (*row_squared_distances)(const double* rows, std::size_t n_rows, std::size_t dim, const double* x,
                                double* out);
};

bool isa_available(Isa isa);
std::string_view isa_name(Isa isa);

/// Table for a specific instruction set; falls back to scalar when the
/// requested variant is not compiled in or not supported by the CPU.
const KernelTable& kernels_for(Isa isa);

/// Currently active table.
const KernelTable& kernels();

/// Switch the active table (tests and benchmarking). Not thread-safe with
/// respect to concurrently running kernels.
void set_active_isa(Isa isa);
Isa active_isa();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return kernels().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

namespace detail {
const KernelTable& scalar_table();
#if defined(GCKN_HAVE_AVX2_VARIANT)
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace gckn::simd
