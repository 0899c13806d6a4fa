#include "gckn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "gckn/engine.hpp"
#include "gckn/error.hpp"
#include "gckn/parallel.hpp"

namespace gckn {

Architecture parse_architecture(const std::string& name) {
  if (name == "walk") return Architecture::walk;
  if (name == "path") return Architecture::path;
  if (name == "subtree") return Architecture::subtree;
  if (name == "3layer") return Architecture::three_layer;
  throw Error(ErrorKind::InvalidArgument, "unknown architecture '" + name + "'");
}

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::walk: return "walk";
    case Architecture::path: return "path";
    case Architecture::subtree: return "subtree";
    case Architecture::three_layer: return "3layer";
  }
  return "?";
}

Pooling parse_pooling(const std::string& name) {
  if (name == "sum") return Pooling::sum;
  if (name == "mean") return Pooling::mean;
  if (name == "max") return Pooling::max;
  throw Error(ErrorKind::InvalidArgument, "unknown pooling '" + name + "'");
}

std::string to_string(Pooling pooling) {
  switch (pooling) {
    case Pooling::sum: return "sum";
    case Pooling::mean: return "mean";
    case Pooling::max: return "max";
  }
  return "?";
}

std::string to_string(KernelFlavor flavor) { return flavor == KernelFlavor::gaussian ? "gaussian" : "homogeneous"; }

KernelFlavor parse_flavor(const std::string& name) {
  if (name == "gaussian") return KernelFlavor::gaussian;
  if (name == "homogeneous") return KernelFlavor::homogeneous;
  throw Error(ErrorKind::InvalidArgument, "unknown kernel flavor '" + name + "'");
}

int GcknModel::input_dim() const {
  if (layers.empty()) throw Error(ErrorKind::InvalidArgument, "model has no layers");
  return layers.front().q_in;
}

int GcknModel::layer_width(int id) const {
  if (id < 0 || id > static_cast<int>(layers.size())) {
    throw Error(ErrorKind::InvalidArgument, "output references missing layer " + std::to_string(id));
  }
  return id == 0 ? input_dim() : layers[static_cast<std::size_t>(id) - 1].q_out;
}

std::vector<Segment> GcknModel::segments() const {
  std::vector<Segment> out;
  std::size_t offset = 0;
  for (int id : output.layers) {
    const auto len = static_cast<std::size_t>(layer_width(id));
    out.push_back({id, id == 0 ? 0 : layers[static_cast<std::size_t>(id) - 1].k, offset, len});
    offset += len;
  }
  return out;
}

std::size_t GcknModel::embedding_dim() const {
  std::size_t d = 0;
  for (int id : output.layers) d += static_cast<std::size_t>(layer_width(id));
  return d;
}

void GcknModel::validate() const {
  if (layers.empty()) throw Error(ErrorKind::InvalidArgument, "model has no layers");
  for (std::size_t j = 0; j < layers.size(); ++j) {
    layers[j].validate();
    if (j > 0 && layers[j].q_in != layers[j - 1].q_out) {
      throw Error(ErrorKind::DimensionMismatch, "layer " + std::to_string(j + 1) + " expects " +
                                                    std::to_string(layers[j].q_in) + " inputs, previous layer has " +
                                                    std::to_string(layers[j - 1].q_out) + " outputs");
    }
  }
  if (output.layers.empty()) throw Error(ErrorKind::InvalidArgument, "output spec selects no layer");
  for (int id : output.layers) layer_width(id);
  if (embed_stats) {
    const auto d = static_cast<Eigen::Index>(embedding_dim());
    if (embed_stats->mean.size() != d || embed_stats->stddev.size() != d) {
      throw Error(ErrorKind::DimensionMismatch, "embedding statistics do not match the output width");
    }
  }
}

GcknModel make_model(const ArchitectureConfig& config, int input_dim, bool unit_norm_inputs) {
  if (input_dim < 1) throw Error(ErrorKind::InvalidArgument, "input dimension must be >= 1");
  if (config.filters < 1) throw Error(ErrorKind::InvalidArgument, "filter count must be >= 1");
  if (config.k1 < 0) throw Error(ErrorKind::InvalidArgument, "k1 must be >= 0");
  if (!(config.sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be > 0");
  std::vector<int> ks{config.k1};
  if (config.arch == Architecture::subtree) ks.push_back(0);
  if (config.arch == Architecture::three_layer) {
    ks.push_back(2);
    ks.push_back(0);
  }
  GcknModel model;
  int q_in = input_dim;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    LayerParams layer;
    layer.k = ks[j];
    layer.q_in = q_in;
    layer.q_out = config.filters;
    layer.alpha = 1.0 / (config.sigma * config.sigma);
    layer.flavor = (j == 0 && unit_norm_inputs) ? KernelFlavor::gaussian : KernelFlavor::homogeneous;
    layer.pooling = config.pooling;
    layer.epsilon = config.epsilon;
    layer.mode = (j == 0 && config.arch == Architecture::walk) ? TraversalMode::walk : TraversalMode::path;
    layer.filters = Matrix::Zero(layer.q_out, static_cast<Eigen::Index>(layer.path_dim()));
    model.layers.push_back(std::move(layer));
    q_in = config.filters;
  }
  if (config.output_layers) {
    model.output.layers = *config.output_layers;
  } else {
    for (std::size_t j = 1; j <= ks.size(); ++j) model.output.layers.push_back(static_cast<int>(j));
  }
  model.output.global_pooling = config.global_pooling.value_or(config.pooling);
  return model;
}

PreparedModel::PreparedModel(GcknModel model) : model_(std::move(model)) {
  model_.validate();
  for (const auto& layer : model_.layers) {
    layers_.push_back({decompose_gram(layer), squared_row_norms(layer.filters)});
  }
}

GraphEmbedding model_forward(const Graph& graph, const PreparedModel& model, PathCache* cache,
                             std::size_t graph_index, bool fast_walks) {
  GraphPaths paths;
  const std::size_t cap = cache ? cache->cap() : kDefaultPathCap;
  for (const auto& layer : model.model().layers) {
    const bool fast = fast_walks && layer.mode == TraversalMode::walk && layer.flavor == KernelFlavor::gaussian &&
                      layer.pooling != Pooling::max;
    if (fast) {
      paths.push_back(nullptr);
    } else if (cache) {
      paths.push_back(cache->get(graph_index, graph, layer.k, layer.mode));
    } else {
      paths.push_back(std::make_shared<const PathTable>(enumerate(graph, layer.k, layer.mode, cap)));
    }
  }
  return {forward_embedding(model, graph, paths, nullptr, nullptr, fast_walks), model.model().segments()};
}

GraphEmbedding model_forward(const Graph& graph, const GcknModel& model) {
  return model_forward(graph, PreparedModel(model));
}

Matrix embed_graphs(std::span<const Graph> graphs, const PreparedModel& model, int workers, PathCache* cache,
                    bool fast_walks) {
  Matrix out(static_cast<Eigen::Index>(graphs.size()), static_cast<Eigen::Index>(model.model().embedding_dim()));
  parallel_for(graphs.size(), workers, [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = model_forward(graphs[i], model, cache, i, fast_walks).vector.transpose();
  });
  return out;
}

EmbedStats compute_embed_stats(const Matrix& embeddings) {
  if (embeddings.rows() == 0) throw Error(ErrorKind::InvalidArgument, "no embeddings to summarize");
  EmbedStats stats;
  stats.mean = embeddings.colwise().mean().transpose();
  stats.stddev.resize(embeddings.cols());
  for (Eigen::Index c = 0; c < embeddings.cols(); ++c) {
    const double var = (embeddings.col(c).array() - stats.mean[c]).square().mean();
    const double sd = std::sqrt(var);
    // Dims that are constant up to rounding pass through unscaled.
    const double tiny = 1e-12 * std::max(1.0, std::abs(stats.mean[c]));
    stats.stddev[c] = sd > tiny ? sd : 1.0;
  }
  return stats;
}

void apply_embed_stats(Matrix& embeddings, const EmbedStats& stats) {
  if (embeddings.cols() != stats.mean.size()) throw Error(ErrorKind::DimensionMismatch, "embedding width mismatch");
  for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
    embeddings.row(r) = (embeddings.row(r) - stats.mean.transpose()).cwiseQuotient(stats.stddev.transpose());
  }
}

GraphEmbedding concat_multiscale(std::span<const GraphEmbedding> embeddings) {
  GraphEmbedding out;
  Eigen::Index total = 0;
  for (const auto& e : embeddings) {
    std::size_t expect = 0;
    for (const auto& seg : e.segments) {
      if (seg.offset != expect) throw Error(ErrorKind::SegmentMismatch, "segments do not tile the embedding");
      expect += seg.length;
    }
    if (expect != static_cast<std::size_t>(e.vector.size())) {
      throw Error(ErrorKind::SegmentMismatch, "segment lengths sum to " + std::to_string(expect) + ", vector has " +
                                                  std::to_string(e.vector.size()));
    }
    total += e.vector.size();
  }
  out.vector.resize(total);
  Eigen::Index offset = 0;
  for (const auto& e : embeddings) {
    out.vector.segment(offset, e.vector.size()) = e.vector;
    for (Segment seg : e.segments) {
      seg.offset += static_cast<std::size_t>(offset);
      out.segments.push_back(seg);
    }
    offset += e.vector.size();
  }
  return out;
}

void write_embeddings_csv(const std::filesystem::path& file, const Matrix& embeddings,
                          std::span<const Segment> segments) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + file.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  bool first = true;
  for (const auto& seg : segments) {
    for (std::size_t j = 0; j < seg.length; ++j) {
      out << (first ? "" : ",") << "layer" << seg.layer << "_k" << seg.k << "_" << j;
      first = false;
    }
  }
  out << '\n';
  for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
    for (Eigen::Index c = 0; c < embeddings.cols(); ++c) out << (c ? "," : "") << embeddings(r, c);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + file.string());
}

}  // namespace gckn
