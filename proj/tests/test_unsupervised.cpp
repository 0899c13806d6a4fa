#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "gckn/error.hpp"
#include "gckn/model.hpp"
#include "gckn/serialization.hpp"
#include "gckn/unsupervised.hpp"
#include "layer_util.hpp"
#include "test_util.hpp"

using namespace gckn;

namespace {

using RowSet = std::multiset<std::vector<double>>;

RowSet rows_of(const Matrix& m) {
  RowSet s;
  for (Eigen::Index i = 0; i < m.rows(); ++i) s.insert(std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols()));
  return s;
}

DatasetBundle toy_dataset(std::uint64_t seed, int n, int labels) {
  std::mt19937_64 gen(seed);
  DatasetBundle d;
  d.name = "toy";
  for (int i = 0; i < n; ++i) {
    d.graphs.push_back(testutil::random_labeled(gen, 5 + static_cast<std::size_t>(i % 4), 0.45, labels));
    d.graph_labels.push_back(i % 2);
  }
  d.class_values = {0, 1};
  d.encoding.mode = AttributeEncoding::Mode::one_hot;
  d.encoding.vocabulary = testutil::iota_vocab(labels);
  return d;
}

std::vector<Matrix> inputs(const DatasetBundle& d) {
  std::vector<Matrix> out;
  for (const auto& g : d.graphs) out.push_back(g.attributes());
  return out;
}

}  // namespace

TEST_CASE("sampling the whole population returns every path once") {
  auto d = toy_dataset(1, 6, 3);
  auto in = inputs(d);
  RowSet population;
  std::size_t count = 0;
  for (const auto& g : d.graphs) {
    auto t = enumerate_paths(g, 2);
    for (std::size_t i = 0; i < t.num_paths(); ++i) {
      Vector z = path_attribute_vector(g, t.path(i));
      population.insert(std::vector<double>(z.data(), z.data() + z.size()));
    }
    count += t.num_paths();
  }
  Matrix all = sample_paths(d, in, 2, TraversalMode::path, count, 5);
  CHECK(rows_of(all) == population);
  CHECK(all.cols() == 9);
  Matrix more = sample_paths(d, in, 2, TraversalMode::path, count * 10, 5);
  CHECK(rows_of(more) == population);

  // a strict subsample is a sub-multiset of the population
  Matrix part = sample_paths(d, in, 2, TraversalMode::path, count / 3, 5);
  CHECK(static_cast<std::size_t>(part.rows()) == count / 3);
  RowSet left = population;
  for (const auto& r : rows_of(part)) {
    auto it = left.find(r);
    REQUIRE(it != left.end());
    left.erase(it);
  }
  CHECK(sample_paths(d, in, 2, TraversalMode::path, count / 3, 5) == part);
  CHECK(sample_paths(d, in, 2, TraversalMode::path, count / 3, 6) != part);
}

TEST_CASE("sampling with no paths anywhere fails") {
  DatasetBundle d;
  d.graphs.push_back(testutil::uniform_labeled(2, {{0, 1}}));
  d.graph_labels = {0};
  auto in = inputs(d);
  try {
    sample_paths(d, in, 3, TraversalMode::path, 10, 0);
    FAIL("expected EmptyPopulation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyPopulation);
  }
}

TEST_CASE("kmeans with one cluster gives the mean") {
  std::mt19937_64 gen(2);
  Matrix x = testutil::random_filters(gen, 40, 3);
  auto r = kmeans(x, 1, 0);
  CHECK((r.centroids.row(0) - x.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
  Matrix f = kmeans_filters(x, 1, 0, KernelFlavor::homogeneous, 0);
  Eigen::RowVectorXd m = x.colwise().mean();
  CHECK((f.row(0) - m / m.norm()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kmeans with q equal to the distinct rows fits exactly") {
  Matrix x(9, 2);
  x << 1, 0, 0, 1, 1, 1, 1, 0, 0, 1, 1, 0, 5, 5, 1, 1, 5, 5;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto r = kmeans(x, 4, seed);
    CHECK(r.distinct_rows == 4);
    CHECK(r.inertia_history.back() == doctest::Approx(0.0));
    const RowSet rows = rows_of(r.centroids);
    std::set<std::vector<double>> got(rows.begin(), rows.end());
    CHECK(got == std::set<std::vector<double>>{{1, 0}, {0, 1}, {1, 1}, {5, 5}});
  }
}

TEST_CASE("kmeans inertia never increases") {
  std::mt19937_64 gen(3);
  Matrix x = testutil::random_filters(gen, 500, 4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto r = kmeans(x, 12, seed);
    REQUIRE(r.inertia_history.size() >= 2);
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
      CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] * (1 + 1e-12));
    CHECK(kmeans(x, 12, seed).centroids == r.centroids);
  }
  CHECK(kmeans(x, 12, 0, 100, 1e-4, 1).centroids == kmeans(x, 12, 0, 100, 1e-4, 4).centroids);
}

TEST_CASE("kmeans pads when the sample is degenerate") {
  Matrix x = Matrix::Constant(10, 3, 0.5);
  auto r = kmeans(x, 4, 0);
  CHECK(r.centroids.rows() == 4);
  CHECK(r.centroids.allFinite());
  CHECK(r.distinct_rows == 1);
  CHECK(rows_of(r.centroids).count({0.5, 0.5, 0.5}) == 1);
}

TEST_CASE("filters from few distinct paths make Nystrom exact on them") {
  auto d = toy_dataset(4, 3, 2);
  auto in = inputs(d);
  Matrix s = sample_paths(d, in, 1, TraversalMode::path, 100000, 0, KernelFlavor::gaussian);
  const RowSet all = rows_of(s);
  std::set<std::vector<double>> distinct(all.begin(), all.end());
  REQUIRE(distinct.size() == 4);  // two labels, ordered pairs
  Matrix z = kmeans_filters(s, 6, 0, KernelFlavor::gaussian, 1);
  auto p = testutil::make_layer(1, 2, z, 1.0, KernelFlavor::gaussian, Pooling::sum, TraversalMode::path, 1e-10);
  Matrix inv = inverse_sqrt_gram(p);
  for (const auto& a : distinct)
    for (const auto& b : distinct) {
      Vector pa = project_path(a, p, inv), pb = project_path(b, p, inv);
      CHECK(std::abs(pa.dot(pb) - kernel_eval(a, b, p)) < 1e-6);
    }
}

TEST_CASE("fit_unsupervised standardizes training embeddings") {
  auto d = toy_dataset(5, 10, 3);
  UnsupervisedConfig cfg;
  cfg.arch.arch = Architecture::subtree;
  cfg.arch.k1 = 1;
  cfg.arch.filters = 6;
  cfg.arch.sigma = 0.6;
  auto m = fit_unsupervised(d, cfg, 42);
  REQUIRE(m.embed_stats.has_value());
  PreparedModel pm(m);
  Matrix e = embed_graphs(d.graphs, pm, 1);
  for (Eigen::Index c = 0; c < e.cols(); ++c) {
    CHECK(std::abs(e.col(c).mean()) < 1e-9);
    const double var = (e.col(c).array() - e.col(c).mean()).square().mean();
    if (m.embed_stats->stddev(c) != 1.0 || var > 0.5) CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (const auto& layer : m.layers) CHECK(layer.filters.allFinite());

  CHECK(model_to_json(fit_unsupervised(d, cfg, 42)) == model_to_json(m));
  CHECK(model_to_json(fit_unsupervised(d, cfg, 43)) != model_to_json(m));
}

TEST_CASE("fit_unsupervised on a training subset ignores the rest") {
  auto d = toy_dataset(6, 12, 3);
  UnsupervisedConfig cfg;
  cfg.arch.arch = Architecture::path;
  cfg.arch.k1 = 2;
  cfg.arch.filters = 5;
  std::vector<std::size_t> train{0, 2, 4, 6, 8, 10};
  auto a = fit_unsupervised(d, train, cfg, 1);
  DatasetBundle changed = d;
  for (std::size_t i = 1; i < changed.graphs.size(); i += 2) changed.graphs[i] = testutil::uniform_labeled(4, {{0, 1}, {1, 2}, {2, 3}}, 3);
  auto b = fit_unsupervised(changed, train, cfg, 1);
  CHECK(model_to_json(a) == model_to_json(b));
}
