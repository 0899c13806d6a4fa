#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "gckn/graph.hpp"

namespace testutil {

using gckn::Edge;
using gckn::Graph;
using gckn::Index;

inline std::vector<std::int64_t> iota_vocab(int n) {
  std::vector<std::int64_t> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

inline Graph labeled(std::size_t n, std::vector<Edge> edges, std::vector<std::int64_t> labels, int n_labels) {
  const auto vocab = iota_vocab(n_labels);
  return Graph::build(n, std::move(edges), gckn::one_hot_encode(labels, vocab), vocab);
}

inline Graph uniform_labeled(std::size_t n, std::vector<Edge> edges, int n_labels = 1) {
  return labeled(n, std::move(edges), std::vector<std::int64_t>(n, 0), n_labels);
}

inline std::vector<Edge> random_edges(std::mt19937_64& gen, std::size_t n, double p) {
  std::vector<Edge> edges;
  std::bernoulli_distribution coin(p);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (coin(gen)) edges.emplace_back(static_cast<Index>(u), static_cast<Index>(v));
    }
  }
  return edges;
}

inline Graph random_labeled(std::mt19937_64& gen, std::size_t n, double p, int n_labels) {
  std::uniform_int_distribution<int> lab(0, n_labels - 1);
  std::vector<std::int64_t> labels(n);
  for (auto& l : labels) l = lab(gen);
  return labeled(n, random_edges(gen, n, p), labels, n_labels);
}

inline Graph random_continuous(std::mt19937_64& gen, std::size_t n, double p, int dim) {
  std::normal_distribution<double> N(0.0, 1.0);
  gckn::Matrix a(static_cast<Eigen::Index>(n), dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = N(gen);
  return Graph::build(n, random_edges(gen, n, p), a);
}

inline std::vector<Index> random_permutation(std::mt19937_64& gen, std::size_t n) {
  std::vector<Index> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<Index>(i);
  std::shuffle(perm.begin(), perm.end(), gen);
  return perm;
}

}  // namespace testutil
