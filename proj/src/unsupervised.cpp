#include "gckn/unsupervised.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "gckn/engine.hpp"
#include "gckn/error.hpp"
#include "gckn/parallel.hpp"

namespace gckn {

Matrix sample_path_vectors(std::span<const PathSource> sources, std::size_t n_samples, std::uint64_t seed,
                           std::optional<KernelFlavor> normalize, int k) {
  if (n_samples == 0) throw Error(ErrorKind::InvalidArgument, "sample size must be >= 1");
  std::vector<std::size_t> starts;
  std::size_t population = 0;
  Eigen::Index dim = -1;
  for (const auto& s : sources) {
    starts.push_back(population);
    population += s.paths->num_paths();
    const auto d = static_cast<Eigen::Index>(s.paths->length()) * s.features->cols();
    if (dim >= 0 && d != dim && s.paths->num_paths() > 0) throw Error(ErrorKind::DimensionMismatch, "inconsistent path widths");
    if (s.paths->num_paths() > 0 || dim < 0) dim = d;
  }
  if (population == 0) throw Error(ErrorKind::EmptyPopulation, "no traversals of the requested length in the sample");

  std::vector<std::size_t> chosen;
  if (population <= n_samples) {
    chosen.resize(population);
    std::iota(chosen.begin(), chosen.end(), 0);
  } else {
    std::mt19937_64 gen(seed);
    chosen.reserve(n_samples);
    // Selection sampling: keeps index order, one draw per candidate.
    std::size_t needed = n_samples;
    for (std::size_t i = 0; i < population && needed > 0; ++i) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      if (u * static_cast<double>(population - i) < static_cast<double>(needed)) {
        chosen.push_back(i);
        --needed;
      }
    }
  }
  Matrix out(static_cast<Eigen::Index>(chosen.size()), dim);
  std::size_t src = 0;
  for (std::size_t r = 0; r < chosen.size(); ++r) {
    const std::size_t g = chosen[r];
    while (src + 1 < sources.size() && starts[src + 1] <= g) ++src;
    const auto& s = sources[src];
    const auto path = s.paths->path(g - starts[src]);
    const auto q = s.features->cols();
    for (std::size_t j = 0; j < path.size(); ++j) {
      out.block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j) * q, 1, q) = s.features->row(path[j]);
    }
  }
  if (normalize) normalize_path_rows(out, *normalize, k);
  return out;
}

Matrix sample_paths(const DatasetBundle& dataset, std::span<const Matrix> layer_inputs, int k, TraversalMode mode,
                    std::size_t n_samples, std::uint64_t seed, std::optional<KernelFlavor> normalize,
                    std::size_t path_cap) {
  if (layer_inputs.size() != dataset.size()) throw Error(ErrorKind::DimensionMismatch, "one input map per graph expected");
  std::vector<PathSource> sources;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    sources.push_back({&layer_inputs[i], std::make_shared<const PathTable>(enumerate(dataset.graphs[i], k, mode, path_cap))});
  }
  return sample_path_vectors(sources, n_samples, seed, normalize, k);
}

GcknModel fit_unsupervised(const DatasetBundle& data, std::span<const std::size_t> train,
                           const UnsupervisedConfig& config, std::uint64_t seed, PathCache* cache) {
  if (train.empty()) throw Error(ErrorKind::InvalidArgument, "empty training set");
  const int q0 = static_cast<int>(data.attribute_dim());
  GcknModel model = make_model(config.arch, q0, data.encoding.mode == AttributeEncoding::Mode::one_hot);
  model.encoding = data.encoding;

  std::vector<Matrix> inputs(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) inputs[i] = data.graphs[train[i]].attributes();
  std::seed_seq seq{seed};
  std::vector<std::uint64_t> layer_seeds(model.layers.size() * 2);
  {
    std::vector<std::uint32_t> raw(layer_seeds.size() * 2);
    seq.generate(raw.begin(), raw.end());
    for (std::size_t i = 0; i < layer_seeds.size(); ++i) {
      layer_seeds[i] = (static_cast<std::uint64_t>(raw[2 * i]) << 32) | raw[2 * i + 1];
    }
  }

  for (std::size_t j = 0; j < model.layers.size(); ++j) {
    LayerParams& layer = model.layers[j];
    std::vector<PathSource> sources(train.size());
    parallel_for(train.size(), config.workers, [&](std::size_t i) {
      const Graph& g = data.graphs[train[i]];
      sources[i].features = &inputs[i];
      sources[i].paths = cache ? cache->get(train[i], g, layer.k, layer.mode)
                               : std::make_shared<const PathTable>(enumerate(g, layer.k, layer.mode));
    });
    const Matrix samples = sample_path_vectors(sources, config.n_samples, layer_seeds[2 * j], layer.flavor, layer.k);
    layer.filters = kmeans_filters(samples, layer.q_out, layer_seeds[2 * j + 1], layer.flavor, layer.k, config.workers);
    if (j + 1 == model.layers.size()) break;
    const Matrix inv_sqrt = inverse_sqrt_gram(layer);
    parallel_for(train.size(), config.workers, [&](std::size_t i) {
      const Graph& g = data.graphs[train[i]];
      inputs[i] = layer_forward(g, {inputs[i]}, *sources[i].paths, layer, inv_sqrt).features;
    });
  }

  const PreparedModel prepared(model);
  Matrix emb(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(model.embedding_dim()));
  parallel_for(train.size(), config.workers, [&](std::size_t i) {
    emb.row(static_cast<Eigen::Index>(i)) = model_forward(data.graphs[train[i]], prepared, cache, train[i]).vector.transpose();
  });
  model.embed_stats = compute_embed_stats(emb);
  return model;
}

GcknModel fit_unsupervised(const DatasetBundle& data, const UnsupervisedConfig& config, std::uint64_t seed) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return fit_unsupervised(data, all, config, seed, nullptr);
}

}  // namespace gckn
