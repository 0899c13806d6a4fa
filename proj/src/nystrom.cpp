#include "gckn/nystrom.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gckn/error.hpp"
#include "gckn/simd.hpp"

namespace gckn {

void LayerParams::validate() const {
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "layer path length must be >= 0");
  if (q_in < 1 || q_out < 1) throw Error(ErrorKind::InvalidArgument, "layer dimensions must be >= 1");
  if (!(alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "alpha must be > 0");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be > 0");
  if (filters.rows() != q_out || static_cast<std::size_t>(filters.cols()) != path_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "filters are " + std::to_string(filters.rows()) + "x" +
                                                  std::to_string(filters.cols()) + ", expected " + std::to_string(q_out) +
                                                  "x" + std::to_string(path_dim()));
  }
  if (!filters.allFinite()) throw Error(ErrorKind::NonFinite, "filters contain NaN/Inf");
}

double sigma_dot(double x, double alpha) { return std::exp(alpha * (x - 1.0)); }

double kernel_eval(std::span<const double> z, double z_norm_sq, std::span<const double> z2, double z2_norm_sq,
                   KernelFlavor flavor, double alpha) {
  const auto& k = simd::kernels();
  if (flavor == KernelFlavor::gaussian) {
    return std::exp(-0.5 * alpha * k.squared_distance(z.data(), z2.data(), z.size()));
  }
  const double norms = std::sqrt(z_norm_sq * z2_norm_sq);
  if (norms == 0.0) return 0.0;
  const double cosine = std::clamp(k.dot(z.data(), z2.data(), z.size()) / norms, -1.0, 1.0);
  return norms * sigma_dot(cosine, alpha);
}

double kernel_eval(std::span<const double> z, std::span<const double> z2, const LayerParams& params) {
  if (z.size() != params.path_dim() || z2.size() != params.path_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "kernel_eval expects vectors of length " +
                                                  std::to_string(params.path_dim()));
  }
  return kernel_eval(z, simd::dot(z, z), z2, simd::dot(z2, z2), params.flavor, params.alpha);
}

Vector squared_row_norms(const Matrix& m) {
  Vector out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out[r] = simd::kernels().dot(m.row(r).data(), m.row(r).data(), static_cast<std::size_t>(m.cols()));
  }
  return out;
}

GramDecomposition decompose_gram(const LayerParams& params) {
  params.validate();
  const Eigen::Index q = params.q_out;
  const Vector norms = squared_row_norms(params.filters);
  GramDecomposition out;
  out.gram.resize(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = i; j < q; ++j) {
      const double v = kernel_eval(params.filter(static_cast<int>(i)), norms[i], params.filter(static_cast<int>(j)),
                                   norms[j], params.flavor, params.alpha);
      out.gram(i, j) = v;
      out.gram(j, i) = v;
    }
    out.gram(i, i) += params.epsilon;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(out.gram);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::EigenFailure, "Gram eigendecomposition did not converge");
  out.eigenvectors = solver.eigenvectors();
  out.eigenvalues = solver.eigenvalues().cwiseMax(params.epsilon);
  const Vector scale = out.eigenvalues.cwiseSqrt().cwiseInverse();
  out.inv_sqrt = out.eigenvectors * scale.asDiagonal() * out.eigenvectors.transpose();
  // Exact symmetry; the product above can differ in the last ulp.
  out.inv_sqrt = (0.5 * (out.inv_sqrt + out.inv_sqrt.transpose())).eval();
  return out;
}

Matrix inverse_sqrt_gram(const LayerParams& params) { return decompose_gram(params).inv_sqrt; }

void filter_responses(std::span<const double> z, const LayerParams& params, std::span<const double> filter_norms_sq,
                      std::span<double> out) {
  const auto& kt = simd::kernels();
  const std::size_t dim = z.size();
  const auto q = static_cast<std::size_t>(params.q_out);
  if (params.flavor == KernelFlavor::gaussian) {
    kt.row_squared_distances(params.filters.data(), q, dim, z.data(), out.data());
    const double scale = -0.5 * params.alpha;
    for (std::size_t i = 0; i < q; ++i) out[i] = std::exp(scale * out[i]);
    return;
  }
  const double zn = std::sqrt(kt.dot(z.data(), z.data(), dim));
  if (zn == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  kt.gemv_rows(params.filters.data(), q, dim, z.data(), out.data());
  for (std::size_t i = 0; i < q; ++i) {
    const double fn = std::sqrt(filter_norms_sq[i]);
    if (fn == 0.0) {
      out[i] = 0.0;
      continue;
    }
    const double cosine = std::clamp(out[i] / (zn * fn), -1.0, 1.0);
    out[i] = zn * fn * sigma_dot(cosine, params.alpha);
  }
}

Vector project_path(std::span<const double> z, const LayerParams& params, const Matrix& inv_sqrt) {
  if (z.size() != params.path_dim()) throw Error(ErrorKind::DimensionMismatch, "path vector length mismatch");
  if (inv_sqrt.rows() != params.q_out || inv_sqrt.cols() != params.q_out) {
    throw Error(ErrorKind::DimensionMismatch, "inverse square root has the wrong shape");
  }
  const Vector norms = squared_row_norms(params.filters);
  Vector responses(params.q_out);
  filter_responses(z, params, {norms.data(), static_cast<std::size_t>(norms.size())},
                   {responses.data(), static_cast<std::size_t>(responses.size())});
  return inv_sqrt * responses;
}

NodeFeatureMap layer_forward(const Graph& graph, const NodeFeatureMap& input, const PathTable& paths,
                             const LayerParams& params, const Matrix& inv_sqrt) {
  params.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(graph.num_nodes());
  if (input.features.rows() != n || input.features.cols() != params.q_in) {
    throw Error(ErrorKind::DimensionMismatch, "layer input is " + std::to_string(input.features.rows()) + "x" +
                                                  std::to_string(input.features.cols()) + ", expected q_in = " +
                                                  std::to_string(params.q_in));
  }
  if (paths.k() != params.k || paths.mode() != params.mode || paths.num_nodes() != graph.num_nodes()) {
    throw Error(ErrorKind::DimensionMismatch, "path table does not match the layer's length/mode");
  }
  const Eigen::Index q = params.q_out;
  const auto dim = params.path_dim();
  const auto qin = static_cast<std::size_t>(params.q_in);
  const Vector fnorms = squared_row_norms(params.filters);
  const std::span<const double> fnorm_span(fnorms.data(), static_cast<std::size_t>(q));

  std::vector<double> z(dim);
  Vector r(q);
  NodeFeatureMap out;
  if (params.pooling == Pooling::max) {
    out.features = Matrix::Zero(n, q);
    Vector proj(q);
    for (Eigen::Index u = 0; u < n; ++u) {
      bool first = true;
      for (std::size_t p = paths.first_path(static_cast<Index>(u)); p < paths.last_path(static_cast<Index>(u)); ++p) {
        const auto path = paths.path(p);
        for (std::size_t j = 0; j < path.size(); ++j) {
          std::copy_n(input.features.row(path[j]).data(), qin, z.data() + j * qin);
        }
        filter_responses(z, params, fnorm_span, {r.data(), static_cast<std::size_t>(q)});
        proj.noalias() = inv_sqrt * r;
        if (first) {
          out.features.row(u) = proj.transpose();
          first = false;
        } else {
          out.features.row(u) = out.features.row(u).cwiseMax(proj.transpose());
        }
      }
    }
    return out;
  }

  Matrix pooled = Matrix::Zero(n, q);
  for (Eigen::Index u = 0; u < n; ++u) {
    const std::size_t count = paths.count_from(static_cast<Index>(u));
    if (count == 0) continue;
    double* acc = pooled.row(u).data();
    for (std::size_t p = paths.first_path(static_cast<Index>(u)); p < paths.last_path(static_cast<Index>(u)); ++p) {
      const auto path = paths.path(p);
      for (std::size_t j = 0; j < path.size(); ++j) std::copy_n(input.features.row(path[j]).data(), qin, z.data() + j * qin);
      filter_responses(z, params, fnorm_span, {r.data(), static_cast<std::size_t>(q)});
      simd::kernels().axpy(1.0, r.data(), acc, static_cast<std::size_t>(q));
    }
    if (params.pooling == Pooling::mean) pooled.row(u) /= static_cast<double>(count);
  }
  out.features = pooled * inv_sqrt;  // inv_sqrt is symmetric
  return out;
}

NodeFeatureMap layer_forward(const Graph& graph, const NodeFeatureMap& input, const PathTable& paths,
                             const LayerParams& params) {
  return layer_forward(graph, input, paths, params, inverse_sqrt_gram(params));
}

NodeFeatureMap walk_layer_forward_fast(const Graph& graph, const NodeFeatureMap& input, const LayerParams& params,
                                       const Matrix& inv_sqrt) {
  params.validate();
  if (params.flavor != KernelFlavor::gaussian) {
    throw Error(ErrorKind::UnsupportedFlavor, "the walk recursion needs a position-separable (gaussian) kernel");
  }
  if (params.pooling == Pooling::max) {
    throw Error(ErrorKind::UnsupportedFlavor, "the walk recursion supports sum and mean pooling only");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(graph.num_nodes());
  if (input.features.rows() != n || input.features.cols() != params.q_in) {
    throw Error(ErrorKind::DimensionMismatch, "layer input shape mismatch");
  }
  const Eigen::Index q = params.q_out;
  const Eigen::Index qin = params.q_in;
  const auto& kt = simd::kernels();

  // b(block)(u)_i = exp(-alpha/2 ||x_u - z_i^block||^2)
  const auto block_response = [&](int block, Matrix& out) {
    out.resize(n, q);
    for (Eigen::Index u = 0; u < n; ++u) {
      const double* x = input.features.row(u).data();
      for (Eigen::Index i = 0; i < q; ++i) {
        const double d = kt.squared_distance(x, params.filters.row(i).data() + block * qin, static_cast<std::size_t>(qin));
        out(u, i) = std::exp(-0.5 * params.alpha * d);
      }
    }
  };

  Matrix c;
  block_response(params.k, c);
  Vector counts = Vector::Ones(n);
  Matrix b;
  for (int j = 1; j <= params.k; ++j) {
    Matrix agg = Matrix::Zero(n, q);
    Vector agg_counts = Vector::Zero(n);
    for (Eigen::Index u = 0; u < n; ++u) {
      for (Index v : graph.neighbors(static_cast<Index>(u))) {
        kt.axpy(1.0, c.row(v).data(), agg.row(u).data(), static_cast<std::size_t>(q));
        agg_counts[u] += counts[v];
      }
    }
    block_response(params.k - j, b);
    c = agg.cwiseProduct(b);
    counts = agg_counts;
  }
  if (params.pooling == Pooling::mean) {
    for (Eigen::Index u = 0; u < n; ++u) {
      if (counts[u] > 0) c.row(u) /= counts[u];
    }
  }
  return {c * inv_sqrt};
}

NodeFeatureMap walk_layer_forward_fast(const Graph& graph, const NodeFeatureMap& input, const LayerParams& params) {
  return walk_layer_forward_fast(graph, input, params, inverse_sqrt_gram(params));
}

namespace {

void normalize_span(double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  if (s <= 0.0) return;
  const double inv = 1.0 / std::sqrt(s);
  for (std::size_t i = 0; i < n; ++i) x[i] *= inv;
}

}  // namespace

void normalize_path_rows(Matrix& rows, KernelFlavor flavor, int k) {
  const auto width = static_cast<std::size_t>(rows.cols());
  const std::size_t blocks = static_cast<std::size_t>(k) + 1;
  if (width % blocks != 0) throw Error(ErrorKind::DimensionMismatch, "row width is not a multiple of k+1");
  const std::size_t block = width / blocks;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    double* x = rows.row(r).data();
    if (flavor == KernelFlavor::gaussian) {
      for (std::size_t b = 0; b < blocks; ++b) normalize_span(x + b * block, block);
    } else {
      normalize_span(x, width);
    }
  }
}

void normalize_filters(LayerParams& params) { normalize_path_rows(params.filters, params.flavor, params.k); }

}  // namespace gckn
