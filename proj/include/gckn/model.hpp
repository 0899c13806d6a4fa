#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gckn/graph.hpp"
#include "gckn/nystrom.hpp"
#include "gckn/paths.hpp"
#include "gckn/types.hpp"

namespace gckn {

enum class Architecture { walk, path, subtree, three_layer };

Architecture parse_architecture(const std::string& name);
std::string to_string(Architecture arch);
Pooling parse_pooling(const std::string& name);
std::string to_string(Pooling pooling);
std::string to_string(KernelFlavor flavor);
KernelFlavor parse_flavor(const std::string& name);

/// Layer ids are 1-based; id 0 denotes the input attributes themselves.
struct OutputSpec {
  std::vector<int> layers;
  Pooling global_pooling = Pooling::sum;
};

struct EmbedStats {
  Vector mean;
  Vector stddev;
};

struct Segment {
  int layer = 0;
  int k = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
  bool operator==(const Segment&) const = default;
};

struct GraphEmbedding {
  Vector vector;
  std::vector<Segment> segments;
};

struct GcknModel {
  std::vector<LayerParams> layers;
  OutputSpec output;
  AttributeEncoding encoding;
  std::optional<EmbedStats> embed_stats;

  int input_dim() const;
  /// Width of layer `id`'s node features (id 0: input attributes).
  int layer_width(int id) const;
  std::vector<Segment> segments() const;
  std::size_t embedding_dim() const;
  void validate() const;
};

struct ArchitectureConfig {
  Architecture arch = Architecture::subtree;
  int k1 = 2;
  int filters = 32;
  double sigma = 0.5;
  Pooling pooling = Pooling::sum;
  std::optional<Pooling> global_pooling;  // defaults to `pooling`
  double epsilon = 0.01;
  std::optional<std::vector<int>> output_layers;  // defaults to every layer
};

/// Layer stack for a named architecture. Filters are zero placeholders.
/// The first layer is gaussian when inputs are unit-norm (one-hot),
/// homogeneous otherwise; upper layers are homogeneous.
GcknModel make_model(const ArchitectureConfig& config, int input_dim, bool unit_norm_inputs);

/// Per-layer data derived from the filters (Gram decomposition, norms).
struct PreparedLayer {
  GramDecomposition gram;
  Vector filter_norms_sq;
};

class PreparedModel {
 public:
  explicit PreparedModel(GcknModel model);
  const GcknModel& model() const { return model_; }
  const PreparedLayer& layer(std::size_t j) const { return layers_[j]; }
  std::size_t num_layers() const { return layers_.size(); }

 private:
  GcknModel model_;
  std::vector<PreparedLayer> layers_;
};

GraphEmbedding model_forward(const Graph& graph, const GcknModel& model);
GraphEmbedding model_forward(const Graph& graph, const PreparedModel& model, PathCache* cache = nullptr,
                             std::size_t graph_index = 0, bool fast_walks = false);

/// One row per graph, in input order. `cache` keys are positions in `graphs`.
Matrix embed_graphs(std::span<const Graph> graphs, const PreparedModel& model, int workers,
                    PathCache* cache = nullptr, bool fast_walks = false);

/// Per-dimension mean and population stddev; zero-variance dims get stddev 1.
EmbedStats compute_embed_stats(const Matrix& embeddings);
void apply_embed_stats(Matrix& embeddings, const EmbedStats& stats);

/// Concatenates embeddings of one graph from several models, shifting offsets.
GraphEmbedding concat_multiscale(std::span<const GraphEmbedding> embeddings);

/// Header "layer<id>_k<k>_<j>" per column; one row per graph.
void write_embeddings_csv(const std::filesystem::path& file, const Matrix& embeddings,
                          std::span<const Segment> segments);

}  // namespace gckn
