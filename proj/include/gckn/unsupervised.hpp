#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gckn/dataset.hpp"
#include "gckn/model.hpp"

namespace gckn {

struct KMeansResult {
  Matrix centroids;                     // q x dim, unnormalized
  std::vector<double> inertia_history;  // weighted inertia after each assignment
  std::size_t distinct_rows = 0;
};

/// k-means++ seeding and Lloyd iterations over the distinct sample rows
/// (duplicates act as weights). Stops once the relative inertia decrease
/// drops below `tolerance` or after `max_iterations`. When q exceeds the
/// number of distinct rows the extra centroids are perturbed copies.
KMeansResult kmeans(const Matrix& samples, int q, std::uint64_t seed, int max_iterations = 100,
                    double tolerance = 1e-4, int workers = 1);

/// kmeans() followed by the layer's filter normalization.
Matrix kmeans_filters(const Matrix& samples, int q, std::uint64_t seed, KernelFlavor flavor, int k, int workers = 1);

struct PathSource {
  const Matrix* features = nullptr;  // node features feeding the layer
  std::shared_ptr<const PathTable> paths;
};

/// Uniform sample without replacement over all (graph, node, path) triples;
/// the whole population, in order, when it has at most n_samples members.
/// Rows are normalized per `normalize` when given.
Matrix sample_path_vectors(std::span<const PathSource> sources, std::size_t n_samples, std::uint64_t seed,
                           std::optional<KernelFlavor> normalize = std::nullopt, int k = 0);

/// Convenience over a dataset: layer_inputs[i] feeds graph i.
Matrix sample_paths(const DatasetBundle& dataset, std::span<const Matrix> layer_inputs, int k, TraversalMode mode,
                    std::size_t n_samples, std::uint64_t seed, std::optional<KernelFlavor> normalize = std::nullopt,
                    std::size_t path_cap = kDefaultPathCap);

struct UnsupervisedConfig {
  ArchitectureConfig arch;
  std::size_t n_samples = 300000;
  int workers = 1;
};

/// Layerwise K-means filters and embedding statistics from `train` (positions
/// into data.graphs). `cache`, when given, is keyed by those positions.
GcknModel fit_unsupervised(const DatasetBundle& data, std::span<const std::size_t> train,
                           const UnsupervisedConfig& config, std::uint64_t seed, PathCache* cache = nullptr);
GcknModel fit_unsupervised(const DatasetBundle& data, const UnsupervisedConfig& config, std::uint64_t seed);

}  // namespace gckn
