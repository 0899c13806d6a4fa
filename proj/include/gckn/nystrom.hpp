#pragma once

#include <cstddef>
#include <span>

#include "gckn/graph.hpp"
#include "gckn/paths.hpp"
#include "gckn/types.hpp"

namespace gckn {

enum class KernelFlavor {
  gaussian,     // exp(-alpha/2 ||z - z'||^2)
  homogeneous,  // ||z|| ||z'|| sigma(<z, z'> / (||z|| ||z'||))
};

enum class Pooling { sum, mean, max };

/// One layer. Anchor points are stored one per row: `filters` is
/// q_out x (q_in * (k + 1)), i.e. the transpose of the column layout.
struct LayerParams {
  int k = 0;
  int q_in = 0;
  int q_out = 0;
  Matrix filters;
  double alpha = 1.0;
  KernelFlavor flavor = KernelFlavor::gaussian;
  Pooling pooling = Pooling::sum;
  double epsilon = 0.01;
  TraversalMode mode = TraversalMode::path;

  std::size_t path_dim() const { return static_cast<std::size_t>(q_in) * (static_cast<std::size_t>(k) + 1); }
  std::span<const double> filter(int i) const {
    return {filters.data() + static_cast<std::ptrdiff_t>(i) * filters.cols(), static_cast<std::size_t>(filters.cols())};
  }
  /// Throws DimensionMismatch / InvalidArgument on inconsistent fields.
  void validate() const;
};

/// sigma(x) = exp(alpha (x - 1)); sigma(1) = 1.
double sigma_dot(double x, double alpha);

/// Kernel between two path attribute vectors of length params.path_dim().
double kernel_eval(std::span<const double> z, std::span<const double> z2, const LayerParams& params);

/// Same as kernel_eval, with the second argument's squared norm given.
double kernel_eval(std::span<const double> z, double z_norm_sq, std::span<const double> z2, double z2_norm_sq,
                   KernelFlavor flavor, double alpha);

/// Eigendecomposition of K_ZZ + eps I with eigenvalues floored at eps.
struct GramDecomposition {
  Matrix gram;          // K_ZZ + eps I
  Matrix eigenvectors;  // columns
  Vector eigenvalues;   // floored, ascending
  Matrix inv_sqrt;      // U diag(lambda^-1/2) U^T
};

GramDecomposition decompose_gram(const LayerParams& params);

/// (K_ZZ + eps I)^{-1/2}; eigenvalues floored at eps.
Matrix inverse_sqrt_gram(const LayerParams& params);

/// Kernel responses [kappa(z_1, z), ..., kappa(z_q, z)].
void filter_responses(std::span<const double> z, const LayerParams& params, std::span<const double> filter_norms_sq,
                      std::span<double> out);

Vector squared_row_norms(const Matrix& m);

/// inv_sqrt * [kappa(z_i, z)]_i
Vector project_path(std::span<const double> z, const LayerParams& params, const Matrix& inv_sqrt);

struct NodeFeatureMap {
  Matrix features;  // n_nodes x q
};

inline NodeFeatureMap input_feature_map(const Graph& graph) { return {graph.attributes()}; }

/// psi_out(u) = pool over p in P_k(G,u) of project_path(concat of input rows along p).
/// Nodes without traversals get a zero row.
NodeFeatureMap layer_forward(const Graph& graph, const NodeFeatureMap& input, const PathTable& paths,
                             const LayerParams& params, const Matrix& inv_sqrt);
NodeFeatureMap layer_forward(const Graph& graph, const NodeFeatureMap& input, const PathTable& paths,
                             const LayerParams& params);

/// Walk-mode layer without enumeration: c_0(u) from the last filter block,
/// c_j(u) = b_j(u) .* sum_{v in N(u)} c_{j-1}(v), psi(u) = inv_sqrt c_k(u).
/// Gaussian flavor with sum or mean pooling only.
NodeFeatureMap walk_layer_forward_fast(const Graph& graph, const NodeFeatureMap& input, const LayerParams& params,
                                       const Matrix& inv_sqrt);
NodeFeatureMap walk_layer_forward_fast(const Graph& graph, const NodeFeatureMap& input, const LayerParams& params);

/// Filter normalization conventions used after K-means and gradient steps.
/// Gaussian layers: each of the k+1 blocks rescaled to unit norm.
/// Homogeneous layers: whole anchor rescaled to unit norm. Zero blocks stay zero.
void normalize_filters(LayerParams& params);
void normalize_path_rows(Matrix& rows, KernelFlavor flavor, int k);

}  // namespace gckn
