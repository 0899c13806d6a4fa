#pragma once

#include <cstddef>
#include <memory>
#include <map>
#include <shared_mutex>
#include <span>
#include <tuple>
#include <vector>

#include "gckn/graph.hpp"

namespace gckn {

enum class TraversalMode { path, walk };

inline constexpr std::size_t kDefaultPathCap = 10'000'000;

/// All length-k traversals (k edges, k+1 nodes) starting at every node.
/// Traversals from node u are contiguous and lexicographically sorted.
class PathTable {
 public:
  PathTable(int k, TraversalMode mode, std::size_t n_nodes);

  int k() const { return k_; }
  TraversalMode mode() const { return mode_; }
  std::size_t length() const { return static_cast<std::size_t>(k_) + 1; }
  std::size_t num_nodes() const { return offsets_.size() - 1; }
  std::size_t num_paths() const { return nodes_.size() / length(); }

  /// Global path index range [first, last) of traversals starting at u.
  std::size_t first_path(Index u) const { return offsets_[static_cast<std::size_t>(u)]; }
  std::size_t last_path(Index u) const { return offsets_[static_cast<std::size_t>(u) + 1]; }
  std::size_t count_from(Index u) const { return last_path(u) - first_path(u); }

  std::span<const Index> path(std::size_t i) const { return {nodes_.data() + i * length(), length()}; }
  std::span<const Index> flat() const { return nodes_; }

  // Builders.
  void append(std::span<const Index> sequence) { nodes_.insert(nodes_.end(), sequence.begin(), sequence.end()); }
  void close_node(Index u) { offsets_[static_cast<std::size_t>(u) + 1] = num_paths(); }

 private:
  int k_;
  TraversalMode mode_;
  std::vector<Index> nodes_;
  std::vector<std::size_t> offsets_;
};

/// Depth-first enumeration of simple paths. Throws PathCapExceeded once
/// more than `cap` paths would be produced for the graph.
PathTable enumerate_paths(const Graph& graph, int k, std::size_t cap = kDefaultPathCap);

/// Enumeration of walks (vertex repetition allowed).
PathTable enumerate_walks(const Graph& graph, int k, std::size_t cap = kDefaultPathCap);

PathTable enumerate(const Graph& graph, int k, TraversalMode mode, std::size_t cap = kDefaultPathCap);

/// Concatenation [a(p_0); ...; a(p_k)].
Vector path_attribute_vector(const Graph& graph, std::span<const Index> path);

/// Memoizes tables keyed by (graph index, k, mode). Safe for concurrent
/// readers and writers; racing inserts of the same key keep the last one,
/// which is harmless because tables are deterministic.
class PathCache {
 public:
  explicit PathCache(std::size_t cap = kDefaultPathCap) : cap_(cap) {}

  std::shared_ptr<const PathTable> get(std::size_t graph_index, const Graph& graph, int k, TraversalMode mode);
  std::size_t size() const;
  std::size_t cap() const { return cap_; }

 private:
  using Key = std::tuple<std::size_t, int, int>;
  std::size_t cap_;
  mutable std::shared_mutex mutex_;
  std::map<Key, std::shared_ptr<const PathTable>> entries_;
};

}  // namespace gckn
