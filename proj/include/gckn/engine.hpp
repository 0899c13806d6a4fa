#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "gckn/model.hpp"

namespace gckn {

/// Per-layer path weights in [0,1], indexed like that layer's PathTable.
struct PathMask {
  std::vector<Vector> layers;
};

PathMask ones_mask(const std::vector<std::shared_ptr<const PathTable>>& paths);

/// paths[j] is the enumeration for layer j+1 of `graph`.
using GraphPaths = std::vector<std::shared_ptr<const PathTable>>;

GraphPaths graph_paths(const GcknModel& model, const Graph& graph, std::size_t cap = kDefaultPathCap,
                       PathCache* cache = nullptr, std::size_t graph_index = 0);

struct LayerTrace {
  Matrix path_vectors;  // P x q_in(k+1), unmasked
  Matrix responses;     // P x q, kernel values at the masked vectors
  Matrix pooled;        // n x q before projection (sum/mean pooling)
  std::vector<std::int64_t> argmax;  // n x q winning path (max pooling), -1 if none
};

struct ForwardTrace {
  std::vector<Matrix> outputs;  // outputs[0] = attributes, outputs[j] = layer j
  std::vector<LayerTrace> layers;
  std::vector<std::vector<std::int64_t>> global_argmax;  // per segment, max pooling
  Vector raw;  // before embed_stats
};

/// Embedding (after embed_stats when present). `paths` may hold null
/// entries only for layers evaluated by the walk recursion.
Vector forward_embedding(const PreparedModel& model, const Graph& graph, const GraphPaths& paths,
                         const PathMask* mask = nullptr, ForwardTrace* trace = nullptr, bool fast_walks = false);

struct ModelGradient {
  std::vector<Matrix> filters;   // same shapes as the layer filters
  std::vector<Matrix> inv_sqrt;  // d loss / d (K_ZZ + eps I)^{-1/2}, folded by finalize_gradient

  static ModelGradient zeros_like(const GcknModel& model);
  void add(const ModelGradient& other);
  void scale(double factor);
};

/// Accumulates gradients of <d_embedding, embedding> for one graph.
/// `grad` and `mask_grad` may be null.
void backward_embedding(const PreparedModel& model, const Graph& graph, const GraphPaths& paths,
                        const ForwardTrace& trace, const PathMask* mask, const Vector& d_embedding,
                        ModelGradient* grad, std::vector<Vector>* mask_grad);

/// Pushes the inverse-square-root gradients through the Gram matrix into the
/// filters (eigen divided differences), then clears them.
void finalize_gradient(const PreparedModel& model, ModelGradient& grad);

}  // namespace gckn
