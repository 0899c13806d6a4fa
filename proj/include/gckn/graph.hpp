#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gckn/types.hpp"

namespace gckn {

using Edge = std::pair<Index, Index>;

/// How node attributes were produced. One-hot rows come with the ordered
/// label vocabulary; continuous rows may carry standardization moments.
struct AttributeEncoding {
  enum class Mode { one_hot, continuous };

  Mode mode = Mode::one_hot;
  std::vector<std::int64_t> vocabulary;
  // Continuous mode only; empty when no standardization was applied.
  std::vector<double> mean;
  std::vector<double> stddev;

  bool standardized() const { return !mean.empty(); }
};

/// Immutable undirected attributed graph. Node indices are 0-based.
class Graph {
 public:
  Graph() = default;

  /// Validates the edge list and attribute shape. Edges are stored with
  /// u < v in input order; adjacency lists are sorted ascending.
  /// When `vocabulary` is given every attribute row must be one-hot.
  static Graph build(std::size_t n_nodes, std::vector<Edge> edges, Matrix attributes,
                     std::optional<std::vector<std::int64_t>> vocabulary = std::nullopt);

  std::size_t num_nodes() const { return adjacency_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t attribute_dim() const { return static_cast<std::size_t>(attributes_.cols()); }
  std::size_t degree(Index u) const { return adjacency_[static_cast<std::size_t>(u)].size(); }

  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const Index> neighbors(Index u) const { return adjacency_[static_cast<std::size_t>(u)]; }
  bool has_edge(Index u, Index v) const;

  const Matrix& attributes() const { return attributes_; }
  std::span<const double> attribute_row(Index u) const {
    return {attributes_.data() + static_cast<std::ptrdiff_t>(u) * attributes_.cols(),
            static_cast<std::size_t>(attributes_.cols())};
  }

  const std::optional<std::vector<std::int64_t>>& label_vocabulary() const { return vocabulary_; }
  bool is_categorical() const { return vocabulary_.has_value(); }

  /// Vocabulary position of each node's one-hot label.
  /// Throws ContinuousAttributesUnsupported for continuous graphs.
  std::vector<int> categorical_labels() const;

  /// Same structure, new attributes (validated as in build).
  Graph with_attributes(Matrix attributes, std::optional<std::vector<std::int64_t>> vocabulary) const;

  /// Graph with node u of the result equal to node perm[u] of this graph.
  Graph permuted(std::span<const Index> perm) const;

 private:
  std::vector<Edge> edges_;
  std::vector<std::vector<Index>> adjacency_;
  Matrix attributes_;
  std::optional<std::vector<std::int64_t>> vocabulary_;
};

/// Row i is the unit vector at the vocabulary position of raw_labels[i].
Matrix one_hot_encode(std::span<const std::int64_t> raw_labels, std::span<const std::int64_t> vocabulary);

/// Sorted unique labels.
std::vector<std::int64_t> make_vocabulary(std::span<const std::int64_t> raw_labels);

std::vector<std::int64_t> node_degrees(const Graph& graph);

/// Replaces attributes with one-hot degrees over the graph's own degree
/// vocabulary.
Graph degrees_as_labels(const Graph& graph);

/// Dataset-wide variant: one shared degree vocabulary for all graphs.
std::vector<Graph> degrees_as_labels(std::span<const Graph> graphs);

}  // namespace gckn
