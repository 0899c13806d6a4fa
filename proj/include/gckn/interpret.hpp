#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gckn/engine.hpp"
#include "gckn/svm.hpp"

namespace gckn {

struct MaskedOutput {
  Vector embedding;
  Vector scores;
  int predicted = 0;
};

/// Forward pass with every path attribute vector of layer l scaled by mask.layers[l].
MaskedOutput masked_forward(const Graph& graph, const PreparedModel& model, const LinearClassifier& clf,
                            const GraphPaths& paths, const PathMask& mask);

/// Squared hinge of head scores against class `target`, plus mu * sum |M|.
double mask_objective(const Graph& graph, const PreparedModel& model, const LinearClassifier& clf,
                      const GraphPaths& paths, const PathMask& mask, int target, double mu);

struct MaskResult {
  PathMask mask;
  GraphPaths paths;
  int target = 0;  // the model's prediction on the unmasked graph
  std::vector<double> objective_history;  // accepted iterates, starting at all ones
};

/// Projected gradient descent on [0,1] with backtracking, from the all-ones mask.
MaskResult optimize_mask(const Graph& graph, const PreparedModel& model, const LinearClassifier& clf, double mu = 0.01,
                         int steps = 300, std::uint64_t seed = 0);

struct MotifEdge {
  Index u = 0;
  Index v = 0;
  double score = 0.0;
};

struct Motif {
  std::vector<Index> nodes;  // ascending
  std::vector<MotifEdge> edges;
  double total_score = 0.0;
};

/// Largest connected component (by node count, then total edge score, then
/// lowest node) of the union of traversals whose mask entry exceeds threshold.
Motif extract_motif(const Graph& graph, const GraphPaths& paths, const PathMask& mask, double threshold = 0.5);

void write_motif_edges(const std::filesystem::path& file, const Motif& motif);
std::string motif_to_dot(const Graph& graph, const Motif& motif);

}  // namespace gckn
