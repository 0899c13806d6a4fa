#include "gckn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "gckn/error.hpp"

namespace gckn {

Graph Graph::build(std::size_t n_nodes, std::vector<Edge> edges, Matrix attributes,
                   std::optional<std::vector<std::int64_t>> vocabulary) {
  if (static_cast<std::size_t>(attributes.rows()) != n_nodes) {
    throw Error(ErrorKind::AttributeShapeMismatch, "attribute rows " + std::to_string(attributes.rows()) +
                                                       " != node count " + std::to_string(n_nodes));
  }
  if (attributes.cols() < 1) throw Error(ErrorKind::AttributeShapeMismatch, "attribute dimension must be >= 1");

  Graph g;
  g.adjacency_.assign(n_nodes, {});
  std::set<Edge> seen;
  g.edges_.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n_nodes || static_cast<std::size_t>(v) >= n_nodes) {
      throw Error(ErrorKind::IndexOutOfRange,
                  "edge (" + std::to_string(u) + "," + std::to_string(v) + ") outside [0," + std::to_string(n_nodes) + ")");
    }
    if (u == v) throw Error(ErrorKind::SelfLoop, "self-loop at node " + std::to_string(u));
    const Edge key = u < v ? Edge{u, v} : Edge{v, u};
    if (!seen.insert(key).second) {
      throw Error(ErrorKind::DuplicateEdge, "duplicate edge (" + std::to_string(key.first) + "," +
                                                std::to_string(key.second) + ")");
    }
    g.edges_.push_back(key);
    g.adjacency_[static_cast<std::size_t>(u)].push_back(v);
    g.adjacency_[static_cast<std::size_t>(v)].push_back(u);
  }
  for (auto& nbrs : g.adjacency_) std::sort(nbrs.begin(), nbrs.end());

  if (!attributes.allFinite()) throw Error(ErrorKind::NonFinite, "attributes contain NaN/Inf");
  if (vocabulary) {
    if (static_cast<std::size_t>(attributes.cols()) != vocabulary->size()) {
      throw Error(ErrorKind::AttributeShapeMismatch, "one-hot width differs from vocabulary size");
    }
    for (Eigen::Index r = 0; r < attributes.rows(); ++r) {
      int ones = 0;
      for (Eigen::Index c = 0; c < attributes.cols(); ++c) {
        const double x = attributes(r, c);
        if (x == 1.0) {
          ++ones;
        } else if (x != 0.0) {
          ones = -1;
          break;
        }
      }
      if (ones != 1) throw Error(ErrorKind::AttributeShapeMismatch, "row " + std::to_string(r) + " is not one-hot");
    }
  }
  g.attributes_ = std::move(attributes);
  g.vocabulary_ = std::move(vocabulary);
  return g;
}

bool Graph::has_edge(Index u, Index v) const {
  const auto nbrs = neighbors(u);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

std::vector<int> Graph::categorical_labels() const {
  if (!vocabulary_) {
    throw Error(ErrorKind::ContinuousAttributesUnsupported, "exact Dirac matching needs categorical labels");
  }
  std::vector<int> labels(num_nodes());
  for (std::size_t u = 0; u < num_nodes(); ++u) {
    Eigen::Index pos = 0;
    attributes_.row(static_cast<Eigen::Index>(u)).maxCoeff(&pos);
    labels[u] = static_cast<int>(pos);
  }
  return labels;
}

Graph Graph::with_attributes(Matrix attributes, std::optional<std::vector<std::int64_t>> vocabulary) const {
  return build(num_nodes(), edges_, std::move(attributes), std::move(vocabulary));
}

Graph Graph::permuted(std::span<const Index> perm) const {
  if (perm.size() != num_nodes()) throw Error(ErrorKind::ShapeMismatch, "permutation size differs from node count");
  std::vector<Index> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[static_cast<std::size_t>(perm[i])] = static_cast<Index>(i);
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (auto [u, v] : edges_) edges.emplace_back(inverse[static_cast<std::size_t>(u)], inverse[static_cast<std::size_t>(v)]);
  Matrix attrs(attributes_.rows(), attributes_.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) attrs.row(static_cast<Eigen::Index>(i)) = attributes_.row(perm[i]);
  return build(num_nodes(), std::move(edges), std::move(attrs), vocabulary_);
}

std::vector<std::int64_t> make_vocabulary(std::span<const std::int64_t> raw_labels) {
  std::vector<std::int64_t> vocab(raw_labels.begin(), raw_labels.end());
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  return vocab;
}

Matrix one_hot_encode(std::span<const std::int64_t> raw_labels, std::span<const std::int64_t> vocabulary) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(raw_labels.size()), static_cast<Eigen::Index>(vocabulary.size()));
  const bool sorted = std::is_sorted(vocabulary.begin(), vocabulary.end());
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    std::ptrdiff_t pos = -1;
    if (sorted) {
      auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), raw_labels[i]);
      if (it != vocabulary.end() && *it == raw_labels[i]) pos = it - vocabulary.begin();
    } else {
      auto it = std::find(vocabulary.begin(), vocabulary.end(), raw_labels[i]);
      if (it != vocabulary.end()) pos = it - vocabulary.begin();
    }
    if (pos < 0) throw Error(ErrorKind::UnknownLabel, "label " + std::to_string(raw_labels[i]) + " not in vocabulary");
    out(static_cast<Eigen::Index>(i), pos) = 1.0;
  }
  return out;
}

std::vector<std::int64_t> node_degrees(const Graph& graph) {
  std::vector<std::int64_t> deg(graph.num_nodes());
  for (std::size_t u = 0; u < deg.size(); ++u) deg[u] = static_cast<std::int64_t>(graph.degree(static_cast<Index>(u)));
  return deg;
}

Graph degrees_as_labels(const Graph& graph) {
  const auto deg = node_degrees(graph);
  auto vocab = make_vocabulary(deg);
  Matrix attrs = one_hot_encode(deg, vocab);
  return graph.with_attributes(std::move(attrs), std::move(vocab));
}

std::vector<Graph> degrees_as_labels(std::span<const Graph> graphs) {
  std::vector<std::int64_t> all;
  for (const auto& g : graphs) {
    const auto d = node_degrees(g);
    all.insert(all.end(), d.begin(), d.end());
  }
  const auto vocab = make_vocabulary(all);
  std::vector<Graph> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(g.with_attributes(one_hot_encode(node_degrees(g), vocab), vocab));
  return out;
}

}  // namespace gckn
