#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gckn/graph.hpp"

namespace gckn {

struct DatasetBundle {
  std::string name;
  std::vector<Graph> graphs;
  std::vector<int> graph_labels;               // contiguous, 0-based
  std::vector<std::int64_t> class_values;      // raw value of each class index
  AttributeEncoding encoding;

  std::size_t size() const { return graphs.size(); }
  int n_classes() const { return static_cast<int>(class_values.size()); }
  std::size_t attribute_dim() const { return graphs.empty() ? 0 : graphs.front().attribute_dim(); }

  /// Graphs and labels at the given indices, in order; encoding is shared.
  DatasetBundle subset(std::span<const std::size_t> indices) const;
};

struct FoldSplit {
  int fold_id = 0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// Reads `<name>_A.txt`, `<name>_graph_indicator.txt`, `<name>_graph_labels.txt`
/// and the optional `<name>_node_labels.txt` / `<name>_node_attributes.txt`
/// from `directory` (1-based TU numbering, converted to 0-based).
DatasetBundle load_tu_dataset(const std::filesystem::path& directory, const std::string& name);

/// Standardizes continuous attribute columns to zero mean and unit variance
/// over all nodes of `train`. One-hot leading columns are left untouched.
std::pair<DatasetBundle, AttributeEncoding> standardize_attributes(const DatasetBundle& train);

/// Applies previously fitted moments (e.g. to a held-out fold).
DatasetBundle apply_standardization(const DatasetBundle& data, const AttributeEncoding& encoding);

/// Inverse transform x * stddev + mean, used to check round-trips.
Graph invert_standardization(const Graph& graph, const AttributeEncoding& encoding);

/// Seeded stratified K-fold partition: each class is shuffled and dealt
/// round-robin across folds, continuing the rotation between classes, so
/// fold sizes differ by at most one.
std::vector<FoldSplit> stratified_kfold(std::span<const int> labels, int n_folds, std::uint64_t seed);

/// Stratified holdout of roughly `fraction` of the positions 0..labels.size()-1.
/// Returns (kept, held_out) as positions into `labels`.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(std::span<const int> labels,
                                                                                 double fraction,
                                                                                 std::uint64_t seed);

}  // namespace gckn
