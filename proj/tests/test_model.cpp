#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include "gckn/dataset.hpp"
#include "gckn/error.hpp"
#include "gckn/exact_kernels.hpp"
#include "gckn/model.hpp"
#include "gckn/serialization.hpp"
#include "gckn/unsupervised.hpp"
#include "layer_util.hpp"
#include "test_util.hpp"

using namespace gckn;
namespace fs = std::filesystem;

namespace {

ArchitectureConfig arch(Architecture a, int k1, int q, double sigma, Pooling pool = Pooling::sum) {
  ArchitectureConfig c;
  c.arch = a;
  c.k1 = k1;
  c.filters = q;
  c.sigma = sigma;
  c.pooling = pool;
  return c;
}

double max_rel(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

fs::path temp_file(const std::string& tag) {
  return fs::temp_directory_path() / ("gckn_model_" + tag + "_" + std::to_string(::getpid()) + ".json");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind load_error(const fs::path& p) {
  try {
    load_model(p);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("architecture names round-trip") {
  for (auto a : {Architecture::walk, Architecture::path, Architecture::subtree, Architecture::three_layer})
    CHECK(parse_architecture(to_string(a)) == a);
  CHECK(to_string(Architecture::three_layer) == "3layer");
  CHECK_THROWS_AS(parse_architecture("bogus"), Error);
  for (auto p : {Pooling::sum, Pooling::mean, Pooling::max}) CHECK(parse_pooling(to_string(p)) == p);
}

TEST_CASE("make_model layer stacks") {
  auto w = make_model(arch(Architecture::walk, 3, 8, 0.5), 4, true);
  REQUIRE(w.layers.size() == 1);
  CHECK(w.layers[0].mode == TraversalMode::walk);
  CHECK(w.layers[0].k == 3);
  CHECK(w.layers[0].flavor == KernelFlavor::gaussian);
  CHECK(w.layers[0].alpha == doctest::Approx(4.0));

  auto s = make_model(arch(Architecture::subtree, 2, 8, 0.5), 4, true);
  REQUIRE(s.layers.size() == 2);
  CHECK(s.layers[1].k == 0);
  CHECK(s.layers[1].q_in == 8);
  CHECK(s.layers[1].flavor == KernelFlavor::homogeneous);
  CHECK(s.output.layers == std::vector<int>{1, 2});
  CHECK(s.embedding_dim() == 16);

  auto t = make_model(arch(Architecture::three_layer, 1, 8, 0.5), 4, false);
  REQUIRE(t.layers.size() == 3);
  CHECK(t.layers[1].k == 2);
  CHECK(t.layers[2].k == 0);
  CHECK(t.layers[0].flavor == KernelFlavor::homogeneous);
}

TEST_CASE("forward example: one filter, one label") {
  auto m = make_model(arch(Architecture::path, 0, 1, 1.0), 2, true);
  m.layers[0].filters = Matrix(1, 2);
  m.layers[0].filters << 1, 0;
  std::vector<std::int64_t> labels(5, 0);
  auto g = testutil::labeled(5, {{0, 1}, {1, 2}, {3, 4}}, labels, 2);
  auto e = model_forward(g, m);
  REQUIRE(e.vector.size() == 1);
  CHECK(e.vector(0) == doctest::Approx(5.0 / std::sqrt(1.01)).epsilon(1e-12));
  REQUIRE(e.segments.size() == 1);
  CHECK(e.segments[0] == Segment{1, 0, 0, 1});
}

TEST_CASE("isomorphic graphs give identical embeddings") {
  std::mt19937_64 gen(1);
  for (auto a : {Architecture::walk, Architecture::path, Architecture::subtree, Architecture::three_layer}) {
    for (auto pool : {Pooling::sum, Pooling::mean, Pooling::max}) {
      auto m = testutil::random_model(gen, arch(a, 2, 6, 0.6, pool), 3, true);
      PreparedModel pm(m);
      for (int t = 0; t < 5; ++t) {
        auto g = testutil::random_labeled(gen, 7, 0.4, 3);
        auto h = g.permuted(testutil::random_permutation(gen, 7));
        CHECK(max_rel(model_forward(h, pm).vector, model_forward(g, pm).vector) < 1e-12);
      }
    }
  }
  auto m = testutil::random_model(gen, arch(Architecture::subtree, 1, 6, 0.6), 2, false);
  PreparedModel pm(m);
  auto g = testutil::random_continuous(gen, 8, 0.4, 2);
  auto h = g.permuted(testutil::random_permutation(gen, 8));
  CHECK(max_rel(model_forward(h, pm).vector, model_forward(g, pm).vector) < 1e-12);
}

TEST_CASE("sum pooling is additive over connected components") {
  std::mt19937_64 gen(2);
  for (auto a : {Architecture::path, Architecture::subtree, Architecture::three_layer}) {
    auto m = testutil::random_model(gen, arch(a, 2, 5, 0.5), 3, true);
    PreparedModel pm(m);
    auto g1 = testutil::random_labeled(gen, 6, 0.4, 3);
    auto g2 = testutil::random_labeled(gen, 5, 0.5, 3);
    Vector whole = model_forward(testutil::disjoint_union(g1, g2), pm).vector;
    Vector parts = model_forward(g1, pm).vector + model_forward(g2, pm).vector;
    CHECK(max_rel(whole, parts) < 1e-12);
  }
}

TEST_CASE("segment restriction equals the smaller model") {
  std::mt19937_64 gen(3);
  auto m = testutil::random_model(gen, arch(Architecture::three_layer, 1, 4, 0.5), 3, true);
  m.output.layers = {0, 1, 2, 3};
  PreparedModel pm(m);
  auto g = testutil::random_labeled(gen, 7, 0.4, 3);
  auto full = model_forward(g, pm);
  REQUIRE(full.segments.size() == 4);
  CHECK(full.segments[0].length == 3);
  for (int j = 1; j <= 3; ++j) {
    GcknModel small = m;
    small.layers.resize(static_cast<std::size_t>(j));
    small.output.layers = {j};
    auto part = model_forward(g, small);
    const auto& seg = full.segments[static_cast<std::size_t>(j)];
    CHECK(seg.layer == j);
    Vector restricted = full.vector.segment(static_cast<Eigen::Index>(seg.offset), static_cast<Eigen::Index>(seg.length));
    CHECK((restricted - part.vector).cwiseAbs().maxCoeff() == 0.0);
  }
  // layer 0 under sum pooling is the attribute column sum
  CHECK((full.vector.head(3) - g.attributes().colwise().sum().transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("concat_multiscale") {
  GraphEmbedding a{Vector::LinSpaced(3, 1, 3), {Segment{1, 1, 0, 3}}};
  GraphEmbedding b{Vector::LinSpaced(5, 4, 8), {Segment{1, 2, 0, 5}}};
  std::vector<GraphEmbedding> ab{a, b};
  auto c = concat_multiscale(ab);
  CHECK(c.vector.size() == 8);
  CHECK(c.segments[1].offset == 3);
  CHECK(c.vector(7) == 8.0);

  GraphEmbedding a2{Vector::LinSpaced(3, -1, 2), a.segments};
  GraphEmbedding b2{Vector::LinSpaced(5, 0.5, -3), b.segments};
  std::vector<GraphEmbedding> ab2{a2, b2};
  auto c2 = concat_multiscale(ab2);
  CHECK(c.vector.dot(c2.vector) == doctest::Approx(a.vector.dot(a2.vector) + b.vector.dot(b2.vector)));

  GraphEmbedding broken{Vector::Zero(4), {Segment{1, 1, 0, 3}}};
  std::vector<GraphEmbedding> bad{a, broken};
  try {
    concat_multiscale(bad);
    FAIL("expected SegmentMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SegmentMismatch);
  }
}

TEST_CASE("k=1 and k=2 segments reproduce the path kernel sum") {
  std::mt19937_64 gen(4);
  std::vector<Graph> graphs;
  for (int i = 0; i < 4; ++i) graphs.push_back(testutil::random_labeled(gen, 5, 0.45, 2));
  std::vector<GcknModel> models;
  for (int k : {1, 2}) {
    std::set<std::vector<double>> distinct;
    for (const auto& g : graphs) {
      auto t = enumerate_paths(g, k);
      for (std::size_t i = 0; i < t.num_paths(); ++i) {
        Vector z = path_attribute_vector(g, t.path(i));
        distinct.insert(std::vector<double>(z.data(), z.data() + z.size()));
      }
    }
    auto m = make_model(arch(Architecture::path, k, static_cast<int>(distinct.size()), 1.0 / std::sqrt(40.0)), 2, true);
    m.layers[0].epsilon = 1e-12;
    Eigen::Index r = 0;
    for (const auto& v : distinct)
      m.layers[0].filters.row(r++) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    models.push_back(m);
  }
  auto embed = [&](const Graph& g) {
    std::vector<GraphEmbedding> parts;
    for (const auto& m : models) parts.push_back(model_forward(g, m));
    return concat_multiscale(parts).vector;
  };
  for (std::size_t a = 0; a < graphs.size(); ++a)
    for (std::size_t b = a; b < graphs.size(); ++b) {
      const double exact = exact_path_kernel(graphs[a], graphs[b], 1) + exact_path_kernel(graphs[a], graphs[b], 2);
      const double approx = embed(graphs[a]).dot(embed(graphs[b]));
      CHECK(approx == doctest::Approx(exact).epsilon(1e-6));
    }
}

TEST_CASE("embed_graphs matches model_forward and is worker independent") {
  std::mt19937_64 gen(5);
  auto m = testutil::random_model(gen, arch(Architecture::subtree, 2, 6, 0.5), 3, true);
  PreparedModel pm(m);
  std::vector<Graph> gs;
  for (int i = 0; i < 9; ++i) gs.push_back(testutil::random_labeled(gen, 4 + static_cast<std::size_t>(i), 0.4, 3));
  Matrix one = embed_graphs(gs, pm, 1);
  Matrix four = embed_graphs(gs, pm, 4);
  CHECK(one == four);
  for (std::size_t i = 0; i < gs.size(); ++i)
    CHECK((one.row(static_cast<Eigen::Index>(i)).transpose() - model_forward(gs[i], pm).vector).cwiseAbs().maxCoeff() == 0.0);
  PathCache cache;
  CHECK(embed_graphs(gs, pm, 2, &cache) == one);
  CHECK(cache.size() > 0);
}

TEST_CASE("walk models agree with and without the fast recursion") {
  std::mt19937_64 gen(6);
  auto m = testutil::random_model(gen, arch(Architecture::walk, 3, 8, 0.7), 3, true);
  PreparedModel pm(m);
  auto g = testutil::random_labeled(gen, 9, 0.35, 3);
  CHECK(max_rel(model_forward(g, pm, nullptr, 0, true).vector, model_forward(g, pm).vector) < 1e-10);
}

TEST_CASE("embed stats standardize columns") {
  std::mt19937_64 gen(7);
  Matrix x = testutil::random_filters(gen, 30, 5);
  x.col(3).setConstant(2.5);
  auto s = compute_embed_stats(x);
  CHECK(s.stddev(3) == 1.0);
  apply_embed_stats(x, s);
  for (int c = 0; c < 5; ++c) {
    CHECK(std::abs(x.col(c).mean()) < 1e-12);
    if (c != 3) CHECK((x.col(c).array() - x.col(c).mean()).square().mean() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("save and load round-trip bit-exactly") {
  std::mt19937_64 gen(8);
  auto m = testutil::random_model(gen, arch(Architecture::subtree, 2, 7, 0.45, Pooling::mean), 3, true);
  m.encoding.vocabulary = {1, 4, 9};
  std::vector<Graph> gs;
  for (int i = 0; i < 3; ++i) gs.push_back(testutil::random_labeled(gen, 6, 0.5, 3));
  Matrix e = embed_graphs(gs, PreparedModel(m), 1);
  m.embed_stats = compute_embed_stats(e);
  LinearClassifier clf;
  clf.weights = testutil::random_filters(gen, 1, static_cast<int>(m.embedding_dim()));
  clf.intercepts = Vector::Constant(1, -0.1234567890123);
  clf.lambda = 1e-3 / 7.0;
  clf.n_classes = 2;

  const auto file = temp_file("rt");
  save_model(m, file, &clf);
  auto back = load_model(file);
  auto clf2 = load_classifier(file);
  for (const auto& g : gs) {
    Vector a = model_forward(g, m).vector, b = model_forward(g, back).vector;
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
  }
  CHECK(back.layers[0].alpha == m.layers[0].alpha);
  CHECK(back.layers[1].pooling == Pooling::mean);
  CHECK(back.encoding.vocabulary == m.encoding.vocabulary);
  REQUIRE(clf2.has_value());
  CHECK(clf2->weights == clf.weights);
  CHECK(clf2->intercepts == clf.intercepts);
  CHECK(clf2->lambda == clf.lambda);

  // same model twice gives the same bytes
  const auto file2 = temp_file("rt2");
  save_model(back, file2, &*clf2);
  CHECK(slurp(file) == slurp(file2));

  std::string text = slurp(file);
  const auto pos = text.find("\"version\"");
  REQUIRE(pos != std::string::npos);
  std::string wrong = text;
  const auto digit = wrong.find('1', pos);
  wrong[digit] = '7';
  std::ofstream(file) << wrong;
  CHECK(load_error(file) == ErrorKind::SchemaVersionMismatch);

  std::ofstream(file) << text.substr(0, text.size() / 2);
  CHECK(load_error(file) == ErrorKind::CorruptModel);

  fs::remove(file);
  fs::remove(file2);
  CHECK(load_error(file) == ErrorKind::IoError);
}

TEST_CASE("embedding csv header carries segment metadata") {
  const auto file = temp_file("csv");
  Matrix e(2, 3);
  e << 1, 2, 3, 4, 5, 6;
  std::vector<Segment> segs{{1, 2, 0, 2}, {2, 0, 2, 1}};
  write_embeddings_csv(file, e, segs);
  std::ifstream in(file);
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "layer1_k2_0,layer1_k2_1,layer2_k0_0");
  std::getline(in, line);
  CHECK(line == "1,2,3");
  fs::remove(file);
}

TEST_CASE("MUTAG graph through an unsupervised two-layer model") {
  const fs::path dir = fs::path(GCKN_TEST_DATA_DIR) / "MUTAG";
  if (!fs::exists(dir)) {
    MESSAGE("MUTAG not present, skipping");
    return;
  }
  auto d = load_tu_dataset(dir, "MUTAG");
  UnsupervisedConfig cfg;
  cfg.arch = arch(Architecture::subtree, 2, 32, 0.5);
  cfg.n_samples = 20000;
  auto m = fit_unsupervised(d, cfg, 1);
  auto e = model_forward(d.graphs[0], m);
  CHECK(e.vector.size() == 64);
  CHECK(e.vector.allFinite());
}
