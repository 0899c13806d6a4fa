#include "gckn/exact_kernels.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>

#include "gckn/error.hpp"
#include "gckn/parallel.hpp"

namespace gckn {
namespace {

SequenceHistogram graph_histogram(const Graph& g, int k, TraversalMode mode) {
  const auto labels = g.categorical_labels();
  const auto table = enumerate(g, k, mode);
  SequenceHistogram hist;
  LabelSequence seq(table.length());
  for (std::size_t p = 0; p < table.num_paths(); ++p) {
    const auto path = table.path(p);
    for (std::size_t j = 0; j < path.size(); ++j) seq[j] = labels[static_cast<std::size_t>(path[j])];
    hist[seq] += 1.0;
  }
  return hist;
}

double histogram_dot(const SequenceHistogram& a, const SequenceHistogram& b) {
  double s = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      s += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return s;
}

void require_same_vocabulary(const Graph& g1, const Graph& g2) {
  const auto& v1 = g1.label_vocabulary();
  const auto& v2 = g2.label_vocabulary();
  if (!v1 || !v2) throw Error(ErrorKind::ContinuousAttributesUnsupported, "Dirac kernels need categorical labels");
  if (*v1 != *v2) throw Error(ErrorKind::UnknownLabel, "graphs use different label vocabularies");
}

Matrix adjacency_matrix(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix a = Matrix::Zero(n, n);
  for (auto [u, v] : g.edges()) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

// Per node: sorted multiset of outgoing path label sequences.
std::vector<std::vector<LabelSequence>> outgoing_multisets(const Graph& g, int k) {
  const auto labels = g.categorical_labels();
  const auto table = enumerate_paths(g, k);
  std::vector<std::vector<LabelSequence>> out(g.num_nodes());
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    for (std::size_t p = table.first_path(static_cast<Index>(u)); p < table.last_path(static_cast<Index>(u)); ++p) {
      const auto path = table.path(p);
      LabelSequence seq(path.size());
      for (std::size_t j = 0; j < path.size(); ++j) seq[j] = labels[static_cast<std::size_t>(path[j])];
      out[u].push_back(std::move(seq));
    }
    std::sort(out[u].begin(), out[u].end());
  }
  return out;
}

}  // namespace

SequenceHistogram traversal_histogram(const Graph& graph, Index u, int k, TraversalMode mode) {
  const auto labels = graph.categorical_labels();
  const auto table = enumerate(graph, k, mode);
  SequenceHistogram hist;
  LabelSequence seq(table.length());
  for (std::size_t p = table.first_path(u); p < table.last_path(u); ++p) {
    const auto path = table.path(p);
    for (std::size_t j = 0; j < path.size(); ++j) seq[j] = labels[static_cast<std::size_t>(path[j])];
    hist[seq] += 1.0;
  }
  return hist;
}

double exact_path_kernel(const Graph& g1, const Graph& g2, int k, bool cumulative) {
  require_same_vocabulary(g1, g2);
  double total = 0.0;
  for (int len = cumulative ? 0 : k; len <= k; ++len) {
    total += histogram_dot(graph_histogram(g1, len, TraversalMode::path), graph_histogram(g2, len, TraversalMode::path));
  }
  return total;
}

Matrix walk_kernel_node_matrix(const Graph& g1, const Graph& g2, int k) {
  require_same_vocabulary(g1, g2);
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "k must be >= 0");
  const auto l1 = g1.categorical_labels();
  const auto l2 = g2.categorical_labels();
  const auto n1 = static_cast<Eigen::Index>(g1.num_nodes());
  const auto n2 = static_cast<Eigen::Index>(g2.num_nodes());
  Matrix match(n1, n2);
  for (Eigen::Index u = 0; u < n1; ++u) {
    for (Eigen::Index v = 0; v < n2; ++v) match(u, v) = l1[static_cast<std::size_t>(u)] == l2[static_cast<std::size_t>(v)] ? 1.0 : 0.0;
  }
  const Matrix a1 = adjacency_matrix(g1);
  const Matrix a2 = adjacency_matrix(g2);
  Matrix kmat = match;
  for (int j = 0; j < k; ++j) kmat = match.cwiseProduct(a1 * kmat * a2.transpose());
  return kmat;
}

double exact_walk_kernel(const Graph& g1, const Graph& g2, int k) { return walk_kernel_node_matrix(g1, g2, k).sum(); }

std::vector<WlColoring> wl_relabel(std::span<const Graph> graphs, int iterations) {
  if (iterations < 0) throw Error(ErrorKind::InvalidArgument, "iterations must be >= 0");
  std::vector<WlColoring> out(graphs.size());
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    out[g].iterations = iterations;
    out[g].labels.push_back(graphs[g].categorical_labels());
  }
  for (int it = 0; it < iterations; ++it) {
    std::map<std::vector<int>, int> dictionary;
    // Signatures are collected first so the dense ids follow signature order.
    std::vector<std::vector<std::vector<int>>> signatures(graphs.size());
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      const auto& prev = out[g].labels.back();
      signatures[g].resize(graphs[g].num_nodes());
      for (std::size_t u = 0; u < graphs[g].num_nodes(); ++u) {
        auto& sig = signatures[g][u];
        for (Index v : graphs[g].neighbors(static_cast<Index>(u))) sig.push_back(prev[static_cast<std::size_t>(v)]);
        std::sort(sig.begin(), sig.end());
        sig.insert(sig.begin(), prev[u]);
        dictionary.emplace(sig, 0);
      }
    }
    int next = 0;
    for (auto& [sig, id] : dictionary) id = next++;
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      std::vector<int> labels(graphs[g].num_nodes());
      for (std::size_t u = 0; u < labels.size(); ++u) labels[u] = dictionary.at(signatures[g][u]);
      out[g].labels.push_back(std::move(labels));
    }
  }
  return out;
}

WlColoring wl_relabel(const Graph& graph, int iterations) {
  return std::move(wl_relabel(std::span<const Graph>(&graph, 1), iterations).front());
}

namespace {

double wl_from_colorings(const WlColoring& c1, const WlColoring& c2, int k) {
  double total = 0.0;
  for (int i = 0; i <= k; ++i) {
    std::map<int, double> h1;
    for (int x : c1.labels[static_cast<std::size_t>(i)]) h1[x] += 1.0;
    for (int x : c2.labels[static_cast<std::size_t>(i)]) {
      if (auto it = h1.find(x); it != h1.end()) total += it->second;
    }
  }
  return total;
}

}  // namespace

double wl_subtree_kernel(const Graph& g1, const Graph& g2, int k) {
  require_same_vocabulary(g1, g2);
  const std::vector<Graph> pair{g1, g2};
  const auto colorings = wl_relabel(pair, k);
  return wl_from_colorings(colorings[0], colorings[1], k);
}

double exact_k2_dirac(const Graph& g1, const Graph& g2, int k1) {
  require_same_vocabulary(g1, g2);
  const auto m1 = outgoing_multisets(g1, k1);
  const auto m2 = outgoing_multisets(g2, k1);
  std::map<std::vector<LabelSequence>, double> counts;
  for (auto& m : m1) counts[m] += 1.0;
  double total = 0.0;
  for (auto& m : m2) {
    if (auto it = counts.find(m); it != counts.end()) total += it->second;
  }
  return total;
}

Matrix exact_gram_matrix(std::span<const Graph> graphs, ExactKernel kernel, int k, int workers) {
  const auto n = static_cast<Eigen::Index>(graphs.size());
  Matrix gram = Matrix::Zero(n, n);
  if (kernel == ExactKernel::wl) {
    // Shared dictionary over the whole dataset.
    for (std::size_t g = 1; g < graphs.size(); ++g) require_same_vocabulary(graphs[0], graphs[g]);
    const auto colorings = wl_relabel(graphs, k);
    parallel_for(graphs.size(), workers, [&](std::size_t i) {
      for (std::size_t j = i; j < graphs.size(); ++j) {
        const double v = wl_from_colorings(colorings[i], colorings[j], k);
        gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    });
    return gram;
  }
  if (kernel == ExactKernel::path) {
    std::vector<SequenceHistogram> hists(graphs.size());
    parallel_for(graphs.size(), workers, [&](std::size_t i) { hists[i] = graph_histogram(graphs[i], k, TraversalMode::path); });
    for (std::size_t g = 1; g < graphs.size(); ++g) require_same_vocabulary(graphs[0], graphs[g]);
    parallel_for(graphs.size(), workers, [&](std::size_t i) {
      for (std::size_t j = i; j < graphs.size(); ++j) {
        const double v = histogram_dot(hists[i], hists[j]);
        gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    });
    return gram;
  }
  parallel_for(graphs.size(), workers, [&](std::size_t i) {
    for (std::size_t j = i; j < graphs.size(); ++j) {
      const double v = kernel == ExactKernel::walk ? exact_walk_kernel(graphs[i], graphs[j], k)
                                                   : exact_k2_dirac(graphs[i], graphs[j], k);
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  });
  return gram;
}

void write_matrix_csv(const std::filesystem::path& file, const Matrix& m) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + file.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + file.string());
}

}  // namespace gckn
