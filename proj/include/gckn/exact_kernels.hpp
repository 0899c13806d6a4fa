#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "gckn/graph.hpp"
#include "gckn/paths.hpp"

namespace gckn {

/// Label sequence a(p) of a traversal, as vocabulary positions.
using LabelSequence = std::vector<int>;
using SequenceHistogram = std::map<LabelSequence, double>;

/// Histogram of label sequences over the length-k traversals of `mode`
/// starting at u (the exact Dirac feature map of the path/walk kernel).
SequenceHistogram traversal_histogram(const Graph& graph, Index u, int k, TraversalMode mode);

/// K_path^(k); with `cumulative`, the sum over lengths 0..k.
double exact_path_kernel(const Graph& g1, const Graph& g2, int k, bool cumulative = false);

/// K_walk^(k) by the node-pair recursion
/// k^(j+1)(u,u') = delta(a(u),a'(u')) * sum_{v~u, v'~u'} k^(j)(v,v').
double exact_walk_kernel(const Graph& g1, const Graph& g2, int k);

/// Node-pair walk kernel matrix [k_walk^(k)(u,u')] from the same recursion.
Matrix walk_kernel_node_matrix(const Graph& g1, const Graph& g2, int k);

struct WlColoring {
  int iterations = 0;
  // labels[i][u] = a_i(u), i = 0..iterations
  std::vector<std::vector<int>> labels;
};

/// Joint relabeling: signatures (own label, sorted neighbor labels) are
/// compressed to dense integers through one dictionary shared by all graphs.
std::vector<WlColoring> wl_relabel(std::span<const Graph> graphs, int iterations);
WlColoring wl_relabel(const Graph& graph, int iterations);

/// sum_{i=0..k} sum_{u,u'} delta(a_i(u), a'_i(u')).
double wl_subtree_kernel(const Graph& g1, const Graph& g2, int k);

/// Number of node pairs whose multisets of outgoing length-k1 path label
/// sequences coincide (two-layer model with Dirac kernels, k2 = 0).
double exact_k2_dirac(const Graph& g1, const Graph& g2, int k1);

enum class ExactKernel { path, walk, wl, k2_dirac };

/// Dataset Gram matrix, row/column order = input order.
Matrix exact_gram_matrix(std::span<const Graph> graphs, ExactKernel kernel, int k, int workers = 1);

void write_matrix_csv(const std::filesystem::path& file, const Matrix& m);

}  // namespace gckn
