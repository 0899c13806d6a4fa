#include <doctest.h>

#include <random>
#include <vector>

#include "gckn/simd.hpp"

using namespace gckn::simd;

namespace {

std::vector<double> noise(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = N(gen);
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(isa_available(Isa::scalar));
  CHECK(kernels_for(Isa::scalar).isa == Isa::scalar);
  CHECK(isa_name(Isa::scalar) == "scalar");
}

TEST_CASE("avx2 kernels agree with scalar reference") {
  if (!isa_available(Isa::avx2)) {
    MESSAGE("avx2 not available on this machine, only scalar exercised");
    return;
  }
  const auto& s = kernels_for(Isa::scalar);
  const auto& v = kernels_for(Isa::avx2);
  REQUIRE(v.isa == Isa::avx2);
  std::mt19937_64 gen(7);
  // lengths straddle the 4- and 16-lane boundaries
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 31u, 33u, 64u, 100u, 257u}) {
    CAPTURE(n);
    auto a = noise(gen, n);
    auto b = noise(gen, n);
    CHECK(rel(v.dot(a.data(), b.data(), n), s.dot(a.data(), b.data(), n)) < 1e-12);
    CHECK(rel(v.squared_distance(a.data(), b.data(), n), s.squared_distance(a.data(), b.data(), n)) < 1e-12);

    auto y1 = b, y2 = b;
    s.axpy(0.37, a.data(), y1.data(), n);
    v.axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(rel(y2[i], y1[i]) < 1e-14);

    const std::size_t rows = 9;
    auto block = noise(gen, rows * n);
    std::vector<double> o1(rows), o2(rows);
    s.gemv_rows(block.data(), rows, n, a.data(), o1.data());
    v.gemv_rows(block.data(), rows, n, a.data(), o2.data());
    for (std::size_t i = 0; i < rows; ++i) CHECK(rel(o2[i], o1[i]) < 1e-12);
    s.row_squared_distances(block.data(), rows, n, a.data(), o1.data());
    v.row_squared_distances(block.data(), rows, n, a.data(), o2.data());
    for (std::size_t i = 0; i < rows; ++i) CHECK(rel(o2[i], o1[i]) < 1e-12);
  }
}

TEST_CASE("active isa can be switched") {
  const Isa before = active_isa();
  set_active_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(dot(a, b) == 32.0);
  CHECK(squared_distance(a, b) == 27.0);
  set_active_isa(before);
}
