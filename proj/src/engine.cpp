#include "gckn/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gckn/error.hpp"
#include "gckn/simd.hpp"

namespace gckn {

PathMask ones_mask(const GraphPaths& paths) {
  PathMask mask;
  for (const auto& table : paths) {
    mask.layers.push_back(Vector::Ones(static_cast<Eigen::Index>(table ? table->num_paths() : 0)));
  }
  return mask;
}

GraphPaths graph_paths(const GcknModel& model, const Graph& graph, std::size_t cap, PathCache* cache,
                       std::size_t graph_index) {
  GraphPaths out;
  for (const auto& layer : model.layers) {
    if (cache) {
      out.push_back(cache->get(graph_index, graph, layer.k, layer.mode));
    } else {
      out.push_back(std::make_shared<const PathTable>(enumerate(graph, layer.k, layer.mode, cap)));
    }
  }
  return out;
}

namespace {

bool walk_recursion_applies(const LayerParams& p) {
  return p.mode == TraversalMode::walk && p.flavor == KernelFlavor::gaussian && p.pooling != Pooling::max;
}

void gather(const Matrix& input, std::span<const Index> path, double* z) {
  const auto q = static_cast<std::size_t>(input.cols());
  for (std::size_t j = 0; j < path.size(); ++j) std::copy_n(input.row(path[j]).data(), q, z + j * q);
}

Matrix run_layer(const LayerParams& params, const PreparedLayer& prepared, const Matrix& input,
                 const PathTable& paths, const Vector* mask, LayerTrace* trace) {
  const Eigen::Index n = input.rows();
  const Eigen::Index q = params.q_out;
  const auto dim = params.path_dim();
  const auto n_paths = static_cast<Eigen::Index>(paths.num_paths());
  if (paths.num_nodes() != static_cast<std::size_t>(n) || paths.k() != params.k || paths.mode() != params.mode) {
    throw Error(ErrorKind::DimensionMismatch, "path table does not match the layer");
  }
  if (mask && mask->size() != n_paths) {
    throw Error(ErrorKind::ShapeMismatch, "mask has " + std::to_string(mask->size()) + " entries, layer has " +
                                              std::to_string(n_paths) + " paths");
  }
  const Matrix& inv_sqrt = prepared.gram.inv_sqrt;
  const std::span<const double> norms(prepared.filter_norms_sq.data(), static_cast<std::size_t>(q));
  std::vector<double> z(dim);
  Vector r(q);
  if (trace) {
    trace->path_vectors.resize(n_paths, static_cast<Eigen::Index>(dim));
    trace->responses.resize(n_paths, q);
  }
  const auto evaluate = [&](std::size_t p) {
    gather(input, paths.path(p), z.data());
    if (trace) std::copy(z.begin(), z.end(), trace->path_vectors.row(static_cast<Eigen::Index>(p)).data());
    if (mask) {
      const double m = (*mask)[static_cast<Eigen::Index>(p)];
      for (double& v : z) v *= m;
    }
    filter_responses(z, params, norms, {r.data(), static_cast<std::size_t>(q)});
    if (trace) trace->responses.row(static_cast<Eigen::Index>(p)) = r.transpose();
  };

  if (params.pooling == Pooling::max) {
    Matrix out = Matrix::Zero(n, q);
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(n * q), -1);
    Vector proj(q);
    for (Eigen::Index u = 0; u < n; ++u) {
      for (std::size_t p = paths.first_path(static_cast<Index>(u)); p < paths.last_path(static_cast<Index>(u)); ++p) {
        evaluate(p);
        proj.noalias() = inv_sqrt * r;
        for (Eigen::Index i = 0; i < q; ++i) {
          auto& a = argmax[static_cast<std::size_t>(u * q + i)];
          if (a < 0 || proj[i] > out(u, i)) {
            out(u, i) = proj[i];
            a = static_cast<std::int64_t>(p);
          }
        }
      }
    }
    if (trace) trace->argmax = std::move(argmax);
    return out;
  }

  Matrix pooled = Matrix::Zero(n, q);
  for (Eigen::Index u = 0; u < n; ++u) {
    const std::size_t count = paths.count_from(static_cast<Index>(u));
    if (count == 0) continue;
    double* acc = pooled.row(u).data();
    for (std::size_t p = paths.first_path(static_cast<Index>(u)); p < paths.last_path(static_cast<Index>(u)); ++p) {
      evaluate(p);
      simd::kernels().axpy(1.0, r.data(), acc, static_cast<std::size_t>(q));
    }
    if (params.pooling == Pooling::mean) pooled.row(u) /= static_cast<double>(count);
  }
  Matrix out = pooled * inv_sqrt;
  if (trace) trace->pooled = std::move(pooled);
  return out;
}

void global_pool(const Matrix& h, Pooling pooling, double* out, std::vector<std::int64_t>* argmax) {
  const Eigen::Index n = h.rows();
  const Eigen::Index q = h.cols();
  std::fill(out, out + q, 0.0);
  if (pooling == Pooling::max) {
    if (argmax) argmax->assign(static_cast<std::size_t>(q), -1);
    for (Eigen::Index i = 0; i < q; ++i) {
      for (Eigen::Index u = 0; u < n; ++u) {
        if (u == 0 || h(u, i) > out[i]) {
          out[i] = h(u, i);
          if (argmax) (*argmax)[static_cast<std::size_t>(i)] = u;
        }
      }
    }
    return;
  }
  for (Eigen::Index u = 0; u < n; ++u) simd::kernels().axpy(1.0, h.row(u).data(), out, static_cast<std::size_t>(q));
  if (pooling == Pooling::mean && n > 0) {
    for (Eigen::Index i = 0; i < q; ++i) out[i] /= static_cast<double>(n);
  }
}

// d/dx of sum_{p,i} d_resp(p,i) * kappa(x_p, z_i), first argument only.
// Homogeneous flavor needs the unit direction of each row even when it is
// scaled by a mask, so the rows are passed unscaled together with `scale`.
struct FirstArgGradient {
  Matrix d_rows;     // same shape as rows
  Matrix d_filters;  // same shape as filters (second-argument part)
  Vector d_scale;    // d/d scale_p
};

FirstArgGradient kernel_gradient(const Matrix& raw_rows, const Vector* scale, const Matrix& filters,
                                 const Vector& filter_norms_sq, const Matrix& d_resp, const Matrix& resp,
                                 KernelFlavor flavor, double alpha, bool want_scale) {
  const Eigen::Index p_count = raw_rows.rows();
  const Eigen::Index q = filters.rows();
  FirstArgGradient g;
  Matrix rows = raw_rows;
  if (scale) rows = scale->asDiagonal() * raw_rows;
  if (flavor == KernelFlavor::gaussian) {
    const Matrix w = d_resp.cwiseProduct(resp);
    const Vector row_sum = w.rowwise().sum();
    const Vector col_sum = w.colwise().sum().transpose();
    g.d_rows = alpha * (w * filters - row_sum.asDiagonal() * rows);
    g.d_filters = alpha * (w.transpose() * rows - col_sum.asDiagonal() * filters);
    if (want_scale) g.d_scale = g.d_rows.cwiseProduct(raw_rows).rowwise().sum();
    return g;
  }
  const Vector raw_norm = raw_rows.rowwise().norm();
  const Vector fnorm = filter_norms_sq.cwiseSqrt();
  const Matrix dots = raw_rows * filters.transpose();
  Matrix a = Matrix::Zero(p_count, q);  // d_resp * sigma(t)
  Matrix c = Matrix::Zero(p_count, q);  // a * (1 - alpha t)
  Vector kraw = Vector::Zero(p_count);  // sum_i d_resp * kappa(raw, z_i)
  for (Eigen::Index p = 0; p < p_count; ++p) {
    if (raw_norm[p] == 0.0) continue;
    for (Eigen::Index i = 0; i < q; ++i) {
      if (fnorm[i] == 0.0) continue;
      const double t = std::clamp(dots(p, i) / (raw_norm[p] * fnorm[i]), -1.0, 1.0);
      const double s = sigma_dot(t, alpha);
      a(p, i) = d_resp(p, i) * s;
      c(p, i) = a(p, i) * (1.0 - alpha * t);
      kraw[p] += d_resp(p, i) * raw_norm[p] * fnorm[i] * s;
    }
  }
  // rows: zhat_p * sum_i c_pi |z_i| + alpha * sum_i a_pi z_i
  const Vector row_coef = c * fnorm;
  g.d_rows = alpha * (a * filters);
  for (Eigen::Index p = 0; p < p_count; ++p) {
    if (raw_norm[p] > 0.0) g.d_rows.row(p) += (row_coef[p] / raw_norm[p]) * raw_rows.row(p);
  }
  // filters: alpha * sum_p a_pi x_p + z_i / |z_i| * sum_p c_pi |x_p|
  Vector scaled_norm = raw_norm;
  if (scale) scaled_norm = raw_norm.cwiseProduct(scale->cwiseAbs());
  const Vector col_coef = c.transpose() * scaled_norm;
  g.d_filters = alpha * (a.transpose() * rows);
  for (Eigen::Index i = 0; i < q; ++i) {
    if (fnorm[i] > 0.0) g.d_filters.row(i) += (col_coef[i] / fnorm[i]) * filters.row(i);
  }
  if (want_scale) g.d_scale = kraw;
  return g;
}

}  // namespace

Vector forward_embedding(const PreparedModel& prepared, const Graph& graph, const GraphPaths& paths,
                         const PathMask* mask, ForwardTrace* trace, bool fast_walks) {
  const GcknModel& model = prepared.model();
  if (static_cast<int>(graph.attribute_dim()) != model.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "graph has " + std::to_string(graph.attribute_dim()) +
                                                  " attribute columns, model expects " +
                                                  std::to_string(model.input_dim()));
  }
  if (mask && mask->layers.size() != model.layers.size()) {
    throw Error(ErrorKind::ShapeMismatch, "mask has the wrong number of layers");
  }
  const std::size_t n_layers = model.layers.size();
  std::vector<Matrix> outputs(n_layers + 1);
  outputs[0] = graph.attributes();
  if (trace) trace->layers.assign(n_layers, {});
  for (std::size_t j = 0; j < n_layers; ++j) {
    const LayerParams& params = model.layers[j];
    const bool plain = !mask && !trace;
    if (plain && fast_walks && walk_recursion_applies(params)) {
      outputs[j + 1] = walk_layer_forward_fast(graph, {outputs[j]}, params, prepared.layer(j).gram.inv_sqrt).features;
      continue;
    }
    if (j >= paths.size() || !paths[j]) throw Error(ErrorKind::InvalidArgument, "missing path table for a layer");
    outputs[j + 1] = run_layer(params, prepared.layer(j), outputs[j], *paths[j], mask ? &mask->layers[j] : nullptr,
                               trace ? &trace->layers[j] : nullptr);
  }

  const auto segments = model.segments();
  Vector raw(static_cast<Eigen::Index>(model.embedding_dim()));
  if (trace) trace->global_argmax.assign(segments.size(), {});
  for (std::size_t s = 0; s < segments.size(); ++s) {
    global_pool(outputs[static_cast<std::size_t>(segments[s].layer)], model.output.global_pooling,
                raw.data() + segments[s].offset, trace ? &trace->global_argmax[s] : nullptr);
  }
  if (!raw.allFinite()) throw Error(ErrorKind::NonFinite, "embedding contains NaN/Inf");
  Vector out = raw;
  if (model.embed_stats) out = (raw - model.embed_stats->mean).cwiseQuotient(model.embed_stats->stddev);
  if (trace) {
    trace->outputs = std::move(outputs);
    trace->raw = raw;
  }
  return out;
}

ModelGradient ModelGradient::zeros_like(const GcknModel& model) {
  ModelGradient g;
  for (const auto& layer : model.layers) {
    g.filters.push_back(Matrix::Zero(layer.filters.rows(), layer.filters.cols()));
    g.inv_sqrt.push_back(Matrix::Zero(layer.q_out, layer.q_out));
  }
  return g;
}

void ModelGradient::add(const ModelGradient& other) {
  for (std::size_t j = 0; j < filters.size(); ++j) {
    filters[j] += other.filters[j];
    inv_sqrt[j] += other.inv_sqrt[j];
  }
}

void ModelGradient::scale(double factor) {
  for (std::size_t j = 0; j < filters.size(); ++j) {
    filters[j] *= factor;
    inv_sqrt[j] *= factor;
  }
}

void backward_embedding(const PreparedModel& prepared, const Graph& graph, const GraphPaths& paths,
                        const ForwardTrace& trace, const PathMask* mask, const Vector& d_embedding,
                        ModelGradient* grad, std::vector<Vector>* mask_grad) {
  const GcknModel& model = prepared.model();
  const std::size_t n_layers = model.layers.size();
  if (trace.layers.size() != n_layers || trace.outputs.size() != n_layers + 1) {
    throw Error(ErrorKind::InvalidArgument, "backward needs a full forward trace");
  }
  const auto n = static_cast<Eigen::Index>(graph.num_nodes());
  Vector d_raw = d_embedding;
  if (model.embed_stats) d_raw = d_raw.cwiseQuotient(model.embed_stats->stddev);

  std::vector<Matrix> d_out(n_layers + 1);
  for (std::size_t j = 1; j <= n_layers; ++j) d_out[j] = Matrix::Zero(n, model.layers[j - 1].q_out);
  const auto segments = model.segments();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (seg.layer == 0) continue;
    Matrix& g = d_out[static_cast<std::size_t>(seg.layer)];
    const auto d_seg = d_raw.segment(static_cast<Eigen::Index>(seg.offset), static_cast<Eigen::Index>(seg.length));
    switch (model.output.global_pooling) {
      case Pooling::sum:
        g.rowwise() += d_seg.transpose();
        break;
      case Pooling::mean:
        if (n > 0) g.rowwise() += d_seg.transpose() / static_cast<double>(n);
        break;
      case Pooling::max:
        for (Eigen::Index i = 0; i < d_seg.size(); ++i) {
          const auto u = trace.global_argmax[s][static_cast<std::size_t>(i)];
          if (u >= 0) g(u, i) += d_seg[i];
        }
        break;
    }
  }
  if (mask_grad) {
    mask_grad->assign(n_layers, {});
    for (std::size_t j = 0; j < n_layers; ++j) (*mask_grad)[j] = Vector::Zero(static_cast<Eigen::Index>(paths[j]->num_paths()));
  }

  for (std::size_t jj = n_layers; jj >= 1; --jj) {
    const std::size_t j = jj - 1;
    const LayerParams& params = model.layers[j];
    const PreparedLayer& pl = prepared.layer(j);
    const LayerTrace& lt = trace.layers[j];
    const PathTable& table = *paths[j];
    const Matrix& g = d_out[jj];
    const Matrix& m_inv = pl.gram.inv_sqrt;
    const auto n_paths = static_cast<Eigen::Index>(table.num_paths());
    const Eigen::Index q = params.q_out;

    Matrix d_resp(n_paths, q);
    if (params.pooling == Pooling::max) {
      Matrix g_proj = Matrix::Zero(n_paths, q);
      for (Eigen::Index u = 0; u < n; ++u) {
        for (Eigen::Index i = 0; i < q; ++i) {
          const auto p = lt.argmax[static_cast<std::size_t>(u * q + i)];
          if (p >= 0) g_proj(p, i) += g(u, i);
        }
      }
      d_resp = g_proj * m_inv;
      if (grad) grad->inv_sqrt[j] += g_proj.transpose() * lt.responses;
    } else {
      const Matrix d_pooled = g * m_inv;
      if (grad) grad->inv_sqrt[j] += lt.pooled.transpose() * g;
      for (Eigen::Index u = 0; u < n; ++u) {
        const std::size_t count = table.count_from(static_cast<Index>(u));
        if (count == 0) continue;
        const double w = params.pooling == Pooling::mean ? 1.0 / static_cast<double>(count) : 1.0;
        for (std::size_t p = table.first_path(static_cast<Index>(u)); p < table.last_path(static_cast<Index>(u)); ++p) {
          d_resp.row(static_cast<Eigen::Index>(p)) = w * d_pooled.row(u);
        }
      }
    }

    const Vector* scale = mask ? &mask->layers[j] : nullptr;
    const bool need_input = jj > 1;
    auto kg = kernel_gradient(lt.path_vectors, scale, params.filters, pl.filter_norms_sq, d_resp, lt.responses,
                              params.flavor, params.alpha, mask_grad != nullptr);
    if (grad) grad->filters[j] += kg.d_filters;
    if (mask_grad) (*mask_grad)[j] = kg.d_scale;
    if (need_input) {
      Matrix& g_in = d_out[jj - 1];
      const Eigen::Index q_in = params.q_in;
      for (Eigen::Index p = 0; p < n_paths; ++p) {
        const double m = scale ? (*scale)[p] : 1.0;
        const auto path = table.path(static_cast<std::size_t>(p));
        for (std::size_t b = 0; b < path.size(); ++b) {
          g_in.row(path[b]) += m * kg.d_rows.block(p, static_cast<Eigen::Index>(b) * q_in, 1, q_in);
        }
      }
    }
  }
}

void finalize_gradient(const PreparedModel& prepared, ModelGradient& grad) {
  const GcknModel& model = prepared.model();
  for (std::size_t j = 0; j < model.layers.size(); ++j) {
    const LayerParams& params = model.layers[j];
    const PreparedLayer& pl = prepared.layer(j);
    const Matrix& u = pl.gram.eigenvectors;
    const Vector root = pl.gram.eigenvalues.cwiseSqrt();
    const Eigen::Index q = params.q_out;
    const Matrix g_sym = 0.5 * (grad.inv_sqrt[j] + grad.inv_sqrt[j].transpose());
    Matrix b = u.transpose() * g_sym * u;
    for (Eigen::Index a = 0; a < q; ++a) {
      for (Eigen::Index c = 0; c < q; ++c) b(a, c) *= -1.0 / (root[a] * root[c] * (root[a] + root[c]));
    }
    const Matrix d_gram = u * b * u.transpose();
    Matrix kzz = pl.gram.gram;
    kzz.diagonal().array() -= params.epsilon;
    // A_ij = kappa(z_i, z_j) + eps; both arguments move with the filters.
    auto kg = kernel_gradient(params.filters, nullptr, params.filters, pl.filter_norms_sq, d_gram, kzz, params.flavor,
                              params.alpha, false);
    grad.filters[j] += kg.d_rows + kg.d_filters;
    grad.inv_sqrt[j].setZero();
  }
}

}  // namespace gckn
