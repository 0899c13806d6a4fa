#pragma once

#include <random>

#include "gckn/nystrom.hpp"

namespace testutil {

inline gckn::LayerParams make_layer(int k, int q_in, gckn::Matrix filters, double alpha,
                                    gckn::KernelFlavor flavor = gckn::KernelFlavor::gaussian,
                                    gckn::Pooling pooling = gckn::Pooling::sum,
                                    gckn::TraversalMode mode = gckn::TraversalMode::path, double epsilon = 0.01) {
  gckn::LayerParams p;
  p.k = k;
  p.q_in = q_in;
  p.q_out = static_cast<int>(filters.rows());
  p.filters = std::move(filters);
  p.alpha = alpha;
  p.flavor = flavor;
  p.pooling = pooling;
  p.mode = mode;
  p.epsilon = epsilon;
  return p;
}

inline gckn::Matrix random_filters(std::mt19937_64& gen, int q, int dim) {
  std::normal_distribution<double> N(0.0, 1.0);
  gckn::Matrix z(q, dim);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = N(gen);
  return z;
}

// Random filters normalized to the layer's convention.
inline gckn::LayerParams random_layer(std::mt19937_64& gen, int k, int q_in, int q, double alpha,
                                      gckn::KernelFlavor flavor, gckn::Pooling pooling = gckn::Pooling::sum,
                                      gckn::TraversalMode mode = gckn::TraversalMode::path) {
  auto p = make_layer(k, q_in, random_filters(gen, q, q_in * (k + 1)), alpha, flavor, pooling, mode);
  gckn::normalize_filters(p);
  return p;
}

}  // namespace testutil

#include "gckn/model.hpp"

namespace testutil {

// Architecture with random normalized filters in every layer.
inline gckn::GcknModel random_model(std::mt19937_64& gen, const gckn::ArchitectureConfig& cfg, int input_dim,
                                    bool unit_norm_inputs) {
  auto m = gckn::make_model(cfg, input_dim, unit_norm_inputs);
  for (auto& layer : m.layers) {
    layer.filters = random_filters(gen, layer.q_out, static_cast<int>(layer.path_dim()));
    gckn::normalize_filters(layer);
  }
  return m;
}

inline gckn::Graph disjoint_union(const gckn::Graph& a, const gckn::Graph& b) {
  const auto off = static_cast<gckn::Index>(a.num_nodes());
  std::vector<gckn::Edge> edges = a.edges();
  for (auto [u, v] : b.edges()) edges.emplace_back(u + off, v + off);
  gckn::Matrix attrs(a.attributes().rows() + b.attributes().rows(), a.attributes().cols());
  attrs << a.attributes(), b.attributes();
  return gckn::Graph::build(a.num_nodes() + b.num_nodes(), std::move(edges), std::move(attrs),
                            a.label_vocabulary());
}

}  // namespace testutil
