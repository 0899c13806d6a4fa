#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "gckn/error.hpp"
#include "gckn/exact_kernels.hpp"
#include "gckn/nystrom.hpp"
#include "gckn/paths.hpp"
#include "kernel_util.hpp"
#include "layer_util.hpp"
#include "test_util.hpp"

using namespace gckn;
using testutil::make_layer;
using testutil::random_layer;
using testutil::path_rows;
using testutil::pooled;
using testutil::relaxed_kernel;
using testutil::row;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

std::span<const double> sp(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TEST_CASE("sigma_dot closed forms") {
  CHECK(sigma_dot(1.0, 0.3) == 1.0);
  CHECK(sigma_dot(1.0, 17.0) == 1.0);
  CHECK(sigma_dot(0.0, 1.0) == doctest::Approx(0.367879).epsilon(1e-6));
  double prev = 0;
  for (double x = -1.0; x <= 1.0; x += 0.05) {
    const double s = sigma_dot(x, 2.5);
    CHECK(s > 0.0);
    CHECK(s <= 1.0);
    CHECK(s >= prev);
    prev = s;
  }
}

TEST_CASE("kernel_eval examples") {
  auto p = make_layer(0, 2, Matrix::Zero(1, 2), 1.0);
  Vector e0 = vec({1, 0}), e1 = vec({0, 1});
  CHECK(kernel_eval(sp(e0), sp(e0), p) == 1.0);
  CHECK(kernel_eval(sp(e0), sp(e1), p) == doctest::Approx(std::exp(-1.0)));
  Vector bad = vec({1, 0, 0});
  try {
    kernel_eval(sp(e0), sp(bad), p);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("homogeneous equals gaussian on unit-norm inputs") {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> N;
  for (int t = 0; t < 50; ++t) {
    Vector a(6), b(6);
    for (int i = 0; i < 6; ++i) {
      a(i) = N(gen);
      b(i) = N(gen);
    }
    a.normalize();
    b.normalize();
    const double alpha = 0.5 + t * 0.1;
    auto g = make_layer(0, 6, Matrix::Zero(1, 6), alpha, KernelFlavor::gaussian);
    auto h = make_layer(0, 6, Matrix::Zero(1, 6), alpha, KernelFlavor::homogeneous);
    CHECK(kernel_eval(sp(a), sp(b), h) == doctest::Approx(kernel_eval(sp(a), sp(b), g)).epsilon(1e-12));
    // symmetry and degree-1 homogeneity
    CHECK(kernel_eval(sp(a), sp(b), h) == kernel_eval(sp(b), sp(a), h));
    Vector a3 = 3.0 * a;
    CHECK(kernel_eval(sp(a3), sp(b), h) == doctest::Approx(3.0 * kernel_eval(sp(a), sp(b), h)).epsilon(1e-12));
  }
  auto h = make_layer(0, 3, Matrix::Zero(1, 3), 1.0, KernelFlavor::homogeneous);
  Vector z = Vector::Zero(3), w = vec({1, 2, 3});
  CHECK(kernel_eval(sp(z), sp(w), h) == 0.0);
  CHECK(kernel_eval(sp(z), sp(z), h) == 0.0);
}

TEST_CASE("inverse_sqrt_gram 1x1 case") {
  auto p = make_layer(0, 2, Matrix(vec({1, 0}).transpose()), 1.0);
  Matrix m = inverse_sqrt_gram(p);
  REQUIRE(m.rows() == 1);
  CHECK(m(0, 0) == doctest::Approx(1.0 / std::sqrt(1.01)).epsilon(1e-12));
  CHECK(m(0, 0) == doctest::Approx(0.995037).epsilon(1e-6));
}

TEST_CASE("duplicated filters stay finite") {
  Matrix z(2, 2);
  z << 1, 0, 1, 0;
  auto p = make_layer(0, 2, z, 1.0);
  Matrix m = inverse_sqrt_gram(p);
  CHECK(m.allFinite());
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("inverse_sqrt_gram squares to the inverse") {
  std::mt19937_64 gen(2);
  for (auto flavor : {KernelFlavor::gaussian, KernelFlavor::homogeneous}) {
    for (int q : {3, 10, 40}) {
      auto p = random_layer(gen, 1, 4, q, 2.0, flavor);
      auto dec = decompose_gram(p);
      Matrix m = dec.inv_sqrt;
      Matrix prod = m * m * dec.gram;
      CHECK((prod - Matrix::Identity(q, q)).cwiseAbs().maxCoeff() < 1e-8);
      Eigen::SelfAdjointEigenSolver<Matrix> es(m);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
      // gram holds K + eps I
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
          const double kij = kernel_eval(p.filter(i), p.filter(j), p) + (i == j ? p.epsilon : 0.0);
          CHECK(dec.gram(i, j) == doctest::Approx(kij).epsilon(1e-12));
        }
    }
  }
}

TEST_CASE("project_path examples") {
  auto p = make_layer(0, 2, Matrix(vec({1, 0}).transpose()), 1.0);
  Vector z = vec({1, 0});
  Vector psi = project_path(sp(z), p, inverse_sqrt_gram(p));
  CHECK(psi(0) == doctest::Approx(0.995037).epsilon(1e-6));

  std::mt19937_64 gen(3);
  auto layer = random_layer(gen, 1, 3, 12, 1.0, KernelFlavor::gaussian);
  Matrix inv = inverse_sqrt_gram(layer);
  double worst = 0;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) {
      Vector a = project_path(layer.filter(i), layer, inv), b = project_path(layer.filter(j), layer, inv);
      worst = std::max(worst, std::abs(a.dot(b) - kernel_eval(layer.filter(i), layer.filter(j), layer)));
    }
  CHECK(worst <= 0.02);
}

TEST_CASE("Nystrom is exact when the filters are all distinct path vectors") {
  std::mt19937_64 gen(4);
  std::vector<Graph> graphs;
  for (int i = 0; i < 4; ++i) graphs.push_back(testutil::random_labeled(gen, 5, 0.4, 2));
  for (int k : {0, 1, 2}) {
    Matrix all = path_rows(graphs, k, TraversalMode::path);
    std::set<std::vector<double>> distinct;
    for (Eigen::Index i = 0; i < all.rows(); ++i) distinct.insert(std::vector<double>(row(all, i).begin(), row(all, i).end()));
    Matrix z(static_cast<Eigen::Index>(distinct.size()), all.cols());
    Eigen::Index r = 0;
    for (const auto& v : distinct) z.row(r++) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    auto p = make_layer(k, 2, z, 1.0, KernelFlavor::gaussian, Pooling::sum, TraversalMode::path, 1e-10);
    for (std::size_t a = 0; a < graphs.size(); ++a)
      for (std::size_t b = a; b < graphs.size(); ++b) {
        const double exact = relaxed_kernel(graphs[a], graphs[b], p);
        const double approx = pooled(graphs[a], p).dot(pooled(graphs[b], p));
        CHECK(std::abs(approx - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
      }
  }
}

TEST_CASE("Dirac limit of the relaxed path kernel") {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 10; ++t) {
    auto a = testutil::random_labeled(gen, 6, 0.4, 3);
    auto b = testutil::random_labeled(gen, 6, 0.4, 3);
    for (int k : {1, 2}) {
      auto p = make_layer(k, 3, Matrix::Zero(1, 3 * (k + 1)), 30.0);
      const double relaxed = relaxed_kernel(a, b, p);
      const double exact = exact_path_kernel(a, b, k);
      const double bound = static_cast<double>(enumerate_paths(a, k).num_paths() * enumerate_paths(b, k).num_paths()) * std::exp(-30.0);
      CHECK(std::abs(relaxed - exact) <= bound);
    }
  }
}

TEST_CASE("Nystrom error shrinks as the filter set grows") {
  std::mt19937_64 gen(6);
  std::vector<Graph> graphs;
  for (int i = 0; i < 12; ++i) graphs.push_back(testutil::random_labeled(gen, 8, 0.35, 3));
  Matrix rows = path_rows(graphs, 1, TraversalMode::path);
  normalize_path_rows(rows, KernelFlavor::gaussian, 1);
  // filter pool and held-out pairs from different graphs
  const Eigen::Index half = rows.rows() / 2;
  Matrix pool = rows.topRows(half), held = rows.bottomRows(rows.rows() - half);
  std::uniform_int_distribution<Eigen::Index> pick(0, held.rows() - 1);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (int i = 0; i < 200; ++i) pairs.emplace_back(pick(gen), pick(gen));
  Matrix noise = testutil::random_filters(gen, 64, static_cast<int>(rows.cols()));
  double prev = 1e300;
  for (int q : {2, 4, 8, 16, 32, 64}) {
    Matrix z = noise.topRows(q);
    auto p = make_layer(1, 3, z, 1.0);
    normalize_filters(p);
    Matrix inv = inverse_sqrt_gram(p);
    std::vector<double> err;
    for (auto [i, j] : pairs) {
      Vector a = project_path(row(held, i), p, inv), b = project_path(row(held, j), p, inv);
      err.push_back(std::abs(kernel_eval(row(held, i), row(held, j), p) - a.dot(b)));
    }
    std::nth_element(err.begin(), err.begin() + 100, err.end());
    const double median = err[100];
    CHECK(median <= prev + 1e-6);
    prev = median;
  }
  (void)pool;
}

TEST_CASE("layer_forward examples") {
  std::vector<std::int64_t> labels{0, 0, 1};
  auto g = testutil::labeled(3, {{0, 1}}, labels, 2);
  auto p = make_layer(0, 2, Matrix(vec({1, 0}).transpose()), 1.0);
  auto out = layer_forward(g, input_feature_map(g), enumerate_paths(g, 0), p);
  CHECK(out.features(0, 0) == doctest::Approx(0.995037).epsilon(1e-6));

  // node 2 is isolated: no length-1 paths
  auto p1 = make_layer(1, 2, Matrix(vec({1, 0, 1, 0}).transpose()), 1.0);
  auto out1 = layer_forward(g, input_feature_map(g), enumerate_paths(g, 1), p1);
  CHECK(out1.features.row(2).isZero(0));
  CHECK(out1.features.row(0).norm() > 0.0);

  std::mt19937_64 gen(7);
  auto tri = testutil::uniform_labeled(3, {{0, 1}, {1, 2}, {0, 2}}, 2);
  auto layer = random_layer(gen, 1, 2, 5, 1.0, KernelFlavor::gaussian);
  auto o = layer_forward(tri, input_feature_map(tri), enumerate_paths(tri, 1), layer);
  CHECK((o.features.row(0) - o.features.row(1)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((o.features.row(1) - o.features.row(2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("layer_forward pooling modes") {
  std::mt19937_64 gen(8);
  auto g = testutil::random_labeled(gen, 7, 0.45, 3);
  auto t = enumerate_paths(g, 2);
  auto base = random_layer(gen, 2, 3, 6, 1.5, KernelFlavor::gaussian);
  Matrix inv = inverse_sqrt_gram(base);
  auto with = [&](Pooling pool) {
    auto p = base;
    p.pooling = pool;
    return layer_forward(g, input_feature_map(g), t, p, inv).features;
  };
  Matrix s = with(Pooling::sum), m = with(Pooling::mean), x = with(Pooling::max);
  for (Index u = 0; u < 7; ++u) {
    const auto c = static_cast<double>(t.count_from(u));
    Eigen::RowVectorXd ref_max = Eigen::RowVectorXd::Constant(6, -1e300);
    for (std::size_t i = t.first_path(u); i < t.last_path(u); ++i) {
      Vector z = path_attribute_vector(g, t.path(i));
      ref_max = ref_max.cwiseMax(project_path(sp(z), base, inv).transpose());
    }
    if (c == 0) {
      CHECK(s.row(u).isZero(0));
      CHECK(m.row(u).isZero(0));
      CHECK(x.row(u).isZero(0));
    } else {
      CHECK((m.row(u) * c - s.row(u)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((x.row(u) - ref_max).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("fast walk recursion matches enumeration") {
  std::mt19937_64 gen(9);
  {
    auto e = testutil::uniform_labeled(2, {{0, 1}}, 2);
    auto p = random_layer(gen, 2, 2, 4, 1.0, KernelFlavor::gaussian, Pooling::sum, TraversalMode::walk);
    Matrix slow = layer_forward(e, input_feature_map(e), enumerate_walks(e, 2), p).features;
    Matrix fast = walk_layer_forward_fast(e, input_feature_map(e), p).features;
    CHECK((slow - fast).cwiseAbs().maxCoeff() < 1e-10);
  }
  for (int t = 0; t < 10; ++t) {
    auto g = testutil::random_labeled(gen, 8, 0.4, 3);
    for (int k = 0; k <= 4; ++k) {
      for (auto pool : {Pooling::sum, Pooling::mean}) {
        auto p = random_layer(gen, k, 3, 16, 0.8, KernelFlavor::gaussian, pool, TraversalMode::walk);
        Matrix slow = layer_forward(g, input_feature_map(g), enumerate_walks(g, k), p).features;
        Matrix fast = walk_layer_forward_fast(g, input_feature_map(g), p).features;
        CHECK((slow - fast).cwiseAbs().maxCoeff() < 1e-8);
      }
    }
  }
  auto g = testutil::uniform_labeled(3, {{0, 1}}, 2);
  auto h = random_layer(gen, 1, 2, 3, 1.0, KernelFlavor::homogeneous, Pooling::sum, TraversalMode::walk);
  try {
    walk_layer_forward_fast(g, input_feature_map(g), h);
    FAIL("expected UnsupportedFlavor");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedFlavor);
  }
}

TEST_CASE("outputs stay finite with zero-norm homogeneous inputs") {
  std::mt19937_64 gen(10);
  auto g = testutil::random_continuous(gen, 6, 0.5, 3);
  Matrix a = g.attributes();
  a.row(0).setZero();
  a.row(3).setZero();
  auto gz = g.with_attributes(a, std::nullopt);
  auto p = random_layer(gen, 1, 3, 8, 1.0, KernelFlavor::homogeneous);
  auto out = layer_forward(gz, input_feature_map(gz), enumerate_paths(gz, 1), p);
  CHECK(out.features.allFinite());
  // a single zero-norm node at k=0 yields a zero row
  auto p0 = random_layer(gen, 0, 3, 8, 1.0, KernelFlavor::homogeneous);
  auto out0 = layer_forward(gz, input_feature_map(gz), enumerate_paths(gz, 0), p0);
  CHECK(out0.features.row(0).isZero(0));
}

TEST_CASE("normalize_filters conventions") {
  std::mt19937_64 gen(11);
  auto g = random_layer(gen, 2, 3, 5, 1.0, KernelFlavor::gaussian);
  for (int i = 0; i < 5; ++i)
    for (int b = 0; b < 3; ++b)
      CHECK(g.filters.row(i).segment(3 * b, 3).norm() == doctest::Approx(1.0).epsilon(1e-14));
  auto h = random_layer(gen, 2, 3, 5, 1.0, KernelFlavor::homogeneous);
  for (int i = 0; i < 5; ++i) CHECK(h.filters.row(i).norm() == doctest::Approx(1.0).epsilon(1e-14));
}
