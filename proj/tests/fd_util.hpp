#pragma once

// Tiny supervised fixtures and a finite-difference check of filter gradients.

#include <algorithm>
#include <random>

#include "gckn/engine.hpp"
#include "gckn/supervised.hpp"
#include "layer_util.hpp"
#include "test_util.hpp"

namespace testutil {

using namespace gckn;

struct Fixture {
  std::vector<Graph> graphs;
  std::vector<GraphPaths> paths;
  std::vector<int> labels;
  GcknModel model;
  LinearClassifier clf;

  std::vector<SampleRef> batch() const {
    std::vector<SampleRef> b;
    for (std::size_t i = 0; i < graphs.size(); ++i) b.push_back({&graphs[i], &paths[i], labels[i]});
    return b;
  }
};

inline ArchitectureConfig arch(Architecture a, int k1, int q, double sigma, Pooling pool) {
  ArchitectureConfig c;
  c.arch = a;
  c.k1 = k1;
  c.filters = q;
  c.sigma = sigma;
  c.pooling = pool;
  return c;
}

// Two graphs, small random classifier so that both samples sit inside the margin.
inline Fixture tiny(std::uint64_t seed, Architecture a, bool one_hot, Pooling pool, int q = 4, int n_classes = 2) {
  std::mt19937_64 gen(seed);
  Fixture f;
  for (int i = 0; i < 2; ++i) {
    f.graphs.push_back(one_hot ? testutil::random_labeled(gen, 6, 0.5, 3) : testutil::random_continuous(gen, 6, 0.5, 3));
    f.labels.push_back(i % n_classes);
  }
  if (n_classes > 2) f.labels.push_back(2);
  if (n_classes > 2) f.graphs.push_back(testutil::random_labeled(gen, 5, 0.5, 3));
  f.model = testutil::random_model(gen, arch(a, 1, q, 0.7, pool), 3, one_hot);
  for (const auto& g : f.graphs) f.paths.push_back(graph_paths(f.model, g));
  const auto dim = static_cast<int>(f.model.embedding_dim());
  EmbedStats stats;
  stats.mean = Vector::Constant(dim, 0.3);
  stats.stddev = Vector::LinSpaced(dim, 0.5, 2.0);
  f.model.embed_stats = stats;
  const int heads = n_classes == 2 ? 1 : n_classes;
  f.clf.weights = 0.05 * testutil::random_filters(gen, heads, dim);
  f.clf.intercepts = Vector::Constant(heads, 0.1);
  f.clf.lambda = 1e-2;
  f.clf.n_classes = n_classes;
  return f;
}

inline double objective(const Fixture& f, const GcknModel& m) { return batch_objective(PreparedModel(m), f.clf, f.batch()); }

// Worst relative deviation between backprop and central differences over every filter coordinate.
inline double fd_error(const Fixture& f) {
  const auto grad = model_backward(PreparedModel(f.model), f.clf, f.batch());
  const double h = 1e-4;
  double gmax = 0;
  for (const auto& g : grad.model.filters) gmax = std::max(gmax, g.cwiseAbs().maxCoeff());
  if (!(gmax > 0.0)) return 1e300;
  double worst = 0;
  for (std::size_t j = 0; j < f.model.layers.size(); ++j) {
    for (Eigen::Index i = 0; i < f.model.layers[j].filters.size(); ++i) {
      GcknModel plus = f.model, minus = f.model;
      plus.layers[j].filters.data()[i] += h;
      minus.layers[j].filters.data()[i] -= h;
      const double fd = (objective(f, plus) - objective(f, minus)) / (2 * h);
      const double g = grad.model.filters[j].data()[i];
      const double scale = std::max({std::abs(fd), std::abs(g), 1e-12});
      worst = std::max(worst, std::abs(fd - g) / scale);
    }
  }
  return worst;
}

}  // namespace testutil
