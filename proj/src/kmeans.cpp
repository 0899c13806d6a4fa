#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "gckn/error.hpp"
#include "gckn/parallel.hpp"
#include "gckn/simd.hpp"
#include "gckn/unsupervised.hpp"

namespace gckn {

namespace {

double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

struct RowLess {
  Eigen::Index cols;
  bool operator()(const double* a, const double* b) const { return std::lexicographical_compare(a, a + cols, b, b + cols); }
};

std::size_t weighted_pick(const std::vector<double>& w, double total, std::mt19937_64& gen) {
  const double target = uniform01(gen) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (acc > target && w[i] > 0.0) return i;
  }
  for (std::size_t i = w.size(); i-- > 0;) {
    if (w[i] > 0.0) return i;
  }
  return 0;
}

}  // namespace

KMeansResult kmeans(const Matrix& samples, int q, std::uint64_t seed, int max_iterations, double tolerance,
                    int workers) {
  if (q < 1) throw Error(ErrorKind::InvalidArgument, "cluster count must be >= 1");
  if (samples.rows() == 0) throw Error(ErrorKind::EmptyPopulation, "no samples to cluster");
  if (!samples.allFinite()) throw Error(ErrorKind::NonFinite, "samples contain NaN/Inf");
  const Eigen::Index dim = samples.cols();
  const auto dsize = static_cast<std::size_t>(dim);

  std::map<const double*, std::size_t, RowLess> index{RowLess{dim}};
  std::vector<Eigen::Index> first_row;
  std::vector<double> weight;
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    auto [it, inserted] = index.try_emplace(samples.row(r).data(), first_row.size());
    if (inserted) {
      first_row.push_back(r);
      weight.push_back(1.0);
    } else {
      weight[it->second] += 1.0;
    }
  }
  const std::size_t m = first_row.size();
  Matrix rows(static_cast<Eigen::Index>(m), dim);
  for (std::size_t i = 0; i < m; ++i) rows.row(static_cast<Eigen::Index>(i)) = samples.row(first_row[i]);

  std::mt19937_64 gen(seed);
  KMeansResult out;
  out.distinct_rows = m;
  out.centroids.resize(q, dim);
  const auto& kt = simd::kernels();

  if (static_cast<std::size_t>(q) >= m) {
    for (std::size_t i = 0; i < m; ++i) out.centroids.row(static_cast<Eigen::Index>(i)) = rows.row(static_cast<Eigen::Index>(i));
    if (static_cast<std::size_t>(q) > m) {
      warn("DegenerateSample: " + std::to_string(m) + " distinct rows for " + std::to_string(q) +
           " centroids; padding with perturbed copies");
      std::normal_distribution<double> noise(0.0, 1.0);
      for (auto c = static_cast<Eigen::Index>(m); c < q; ++c) {
        const auto src = static_cast<Eigen::Index>(static_cast<std::size_t>(c) % m);
        const double scale = 1e-3 * std::max(1.0, rows.row(src).norm());
        for (Eigen::Index d = 0; d < dim; ++d) out.centroids(c, d) = rows(src, d) + scale * noise(gen);
      }
    }
    out.inertia_history.push_back(0.0);
    return out;
  }

  const double total_weight = static_cast<double>(samples.rows());
  // k-means++ seeding.
  std::vector<double> d2(m, 0.0), score(m);
  out.centroids.row(0) = rows.row(static_cast<Eigen::Index>(weighted_pick(weight, total_weight, gen)));
  for (std::size_t i = 0; i < m; ++i) d2[i] = kt.squared_distance(rows.row(static_cast<Eigen::Index>(i)).data(), out.centroids.row(0).data(), dsize);
  for (Eigen::Index c = 1; c < q; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      score[i] = weight[i] * d2[i];
      total += score[i];
    }
    const std::size_t pick = total > 0.0 ? weighted_pick(score, total, gen) : static_cast<std::size_t>(c);
    out.centroids.row(c) = rows.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < m; ++i) {
      d2[i] = std::min(d2[i], kt.squared_distance(rows.row(static_cast<Eigen::Index>(i)).data(), out.centroids.row(c).data(), dsize));
    }
  }

  std::vector<int> assign(m, 0);
  std::vector<double> dist(m, 0.0);
  for (int iter = 0; iter < max_iterations; ++iter) {
    parallel_for(m, workers, [&](std::size_t i) {
      const double* x = rows.row(static_cast<Eigen::Index>(i)).data();
      int best = 0;
      double best_d = kt.squared_distance(x, out.centroids.row(0).data(), dsize);
      for (Eigen::Index c = 1; c < q; ++c) {
        const double d = kt.squared_distance(x, out.centroids.row(c).data(), dsize);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      assign[i] = best;
      dist[i] = best_d;
    });
    double inertia = 0.0;
    for (std::size_t i = 0; i < m; ++i) inertia += weight[i] * dist[i];
    const double previous = out.inertia_history.empty() ? 0.0 : out.inertia_history.back();
    out.inertia_history.push_back(inertia);
    if (iter > 0 && (previous <= 0.0 || (previous - inertia) / previous < tolerance)) break;
    if (inertia == 0.0) break;

    Matrix sums = Matrix::Zero(q, dim);
    Vector mass = Vector::Zero(q);
    for (std::size_t i = 0; i < m; ++i) {
      sums.row(assign[i]) += weight[i] * rows.row(static_cast<Eigen::Index>(i));
      mass[assign[i]] += weight[i];
    }
    for (Eigen::Index c = 0; c < q; ++c) {
      if (mass[c] > 0.0) out.centroids.row(c) = sums.row(c) / mass[c];
    }
  }
  return out;
}

Matrix kmeans_filters(const Matrix& samples, int q, std::uint64_t seed, KernelFlavor flavor, int k, int workers) {
  Matrix z = kmeans(samples, q, seed, 100, 1e-4, workers).centroids;
  normalize_path_rows(z, flavor, k);
  return z;
}

}  // namespace gckn
