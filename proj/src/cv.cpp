#include "gckn/cv.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <random>

#include "gckn/error.hpp"
#include "gckn/parallel.hpp"
#include "gckn/supervised.hpp"
#include "gckn/svm.hpp"
#include "gckn/unsupervised.hpp"

namespace gckn {

TrainingMode parse_training_mode(const std::string& name) {
  if (name == "unsup") return TrainingMode::unsup;
  if (name == "sup") return TrainingMode::sup;
  throw Error(ErrorKind::InvalidArgument, "unknown training mode '" + name + "'");
}

std::string to_string(TrainingMode mode) { return mode == TrainingMode::unsup ? "unsup" : "sup"; }

CvGrid default_grid(TrainingMode mode) {
  CvGrid g;
  g.sigmas = {0.3, 0.4, 0.5, 0.6, 1.0, 1.5, 2.0};
  for (int k = 2; k <= 12; ++k) g.k1s.push_back(k);
  g.local_pooling = {Pooling::sum, Pooling::mean, Pooling::max};
  g.global_pooling = {Pooling::sum, Pooling::mean, Pooling::max};
  if (mode == TrainingMode::unsup) {
    g.filters = {32, 128, 512, 1024};
  } else {
    g.filters = {32, 64};
    g.lambdas = {0.01, 0.001, 0.0001, 1e-05, 1e-06, 1e-07};
  }
  return g;
}

CvGrid fast_grid(TrainingMode mode) {
  CvGrid g;
  g.sigmas = {0.4, 0.6};
  g.k1s = {2, 3};
  g.local_pooling = {Pooling::sum};
  g.global_pooling = {Pooling::sum};
  if (mode == TrainingMode::unsup) {
    g.filters = {512};
  } else {
    g.filters = {32};
    g.lambdas = {0.001, 0.0001};
    g.max_epochs = 50;
  }
  return g;
}

namespace {

struct GridPoint {
  double sigma;
  int k1;
  int filters;
  Pooling local;
  Pooling global;
};

std::vector<GridPoint> expand(const CvGrid& g) {
  std::vector<GridPoint> out;
  for (double s : g.sigmas)
    for (int k : g.k1s)
      for (int q : g.filters)
        for (Pooling l : g.local_pooling)
          for (Pooling gp : g.global_pooling) out.push_back({s, k, q, l, gp});
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "hyperparameter grid is empty");
  return out;
}

ArchitectureConfig arch_config(const CvOptions& o, const GridPoint& p) {
  ArchitectureConfig c;
  c.arch = o.arch;
  c.k1 = p.k1;
  c.filters = p.filters;
  c.sigma = p.sigma;
  c.pooling = p.local;
  c.global_pooling = p.global;
  return c;
}

// Squared hinge on held-out data, averaged over samples (no penalty).
double heldout_loss(const LinearClassifier& clf, const Matrix& x, std::span<const int> y) {
  const Matrix s = decision_function(clf, x);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (int h = 0; h < clf.n_heads(); ++h) {
      const double t = head_target(clf.n_classes, h, y[static_cast<std::size_t>(i)]);
      const double slack = std::max(0.0, 1.0 - t * s(i, h));
      loss += slack * slack;
    }
  }
  return x.rows() > 0 ? loss / static_cast<double>(x.rows()) : 0.0;
}

std::vector<int> labels_of(const DatasetBundle& d, std::span<const std::size_t> idx) {
  std::vector<int> out;
  for (std::size_t i : idx) out.push_back(d.graph_labels[i]);
  return out;
}

struct Candidate {
  double val_acc = -1.0;
  double val_loss = std::numeric_limits<double>::infinity();
  bool better_than(const Candidate& o) const {
    return val_acc > o.val_acc || (val_acc == o.val_acc && val_loss < o.val_loss);
  }
};

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Embeddings of `fit` and `eval` under filters learned on `fit`. With
// multiscale, one model per k1 = 0..k1 and the features are concatenated.
std::pair<Matrix, Matrix> unsup_features(const DatasetBundle& data, std::span<const std::size_t> fit,
                                         std::span<const std::size_t> eval, UnsupervisedConfig cfg, bool multiscale,
                                         std::uint64_t seed, PathCache& cache) {
  const int top = cfg.arch.k1;
  std::vector<Matrix> a, b;
  for (int k = multiscale ? 0 : top; k <= top; ++k) {
    cfg.arch.k1 = k;
    const PreparedModel prepared(fit_unsupervised(data, fit, cfg, seed, &cache));
    a.push_back(embed_subset(data, fit, prepared, 1, &cache));
    b.push_back(embed_subset(data, eval, prepared, 1, &cache));
  }
  auto stack = [](const std::vector<Matrix>& parts) {
    Eigen::Index cols = 0;
    for (const auto& m : parts) cols += m.cols();
    Matrix out(parts.front().rows(), cols);
    Eigen::Index at = 0;
    for (const auto& m : parts) {
      out.middleCols(at, m.cols()) = m;
      at += m.cols();
    }
    return out;
  };
  return {stack(a), stack(b)};
}

FoldResult run_fold(const DatasetBundle& raw, const CvGrid& grid, const CvOptions& o, const FoldSplit& split,
                    int repeat, PathCache& cache) {
  // Continuous attributes are standardized with training-fold moments only.
  DatasetBundle standardized;
  if (raw.encoding.mode == AttributeEncoding::Mode::continuous) {
    standardized = apply_standardization(raw, standardize_attributes(raw.subset(split.train_indices)).second);
  }
  const DatasetBundle& data = raw.encoding.mode == AttributeEncoding::Mode::continuous ? standardized : raw;
  const std::uint64_t fold_seed = mix(o.seed, static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(split.fold_id));
  const auto train_labels = labels_of(data, split.train_indices);
  const auto [kept_pos, held_pos] = stratified_holdout(train_labels, o.validation_fraction, fold_seed);
  std::vector<std::size_t> inner, val;
  for (std::size_t p : kept_pos) inner.push_back(split.train_indices[p]);
  for (std::size_t p : held_pos) val.push_back(split.train_indices[p]);
  const auto inner_y = labels_of(data, inner);
  const auto val_y = labels_of(data, val);
  const auto test_y = labels_of(data, split.test_indices);
  const auto points = expand(grid);

  FoldResult res;
  res.repeat = repeat;
  res.fold = split.fold_id;
  res.n_train = split.train_indices.size();
  res.n_test = split.test_indices.size();
  Candidate best;
  std::optional<GridPoint> best_point;

  UnsupervisedConfig ucfg;
  ucfg.n_samples = o.n_samples;
  if (o.mode == TrainingMode::unsup) {
    const auto lambdas_inner = grid.lambdas.empty() ? lambda_grid(inner.size()) : grid.lambdas;
    std::size_t best_lambda_index = 0;
    for (const auto& p : points) {
      ucfg.arch = arch_config(o, p);
      const auto [xi, xv] = unsup_features(data, inner, val, ucfg, o.multiscale, fold_seed, cache);
      for (std::size_t li = 0; li < lambdas_inner.size(); ++li) {
        const auto clf = train_squared_hinge(xi, inner_y, lambdas_inner[li], fold_seed, data.n_classes());
        Candidate c{accuracy(clf, xv, val_y), heldout_loss(clf, xv, val_y)};
        if (c.better_than(best)) {
          best = c;
          best_point = p;
          best_lambda_index = li;
        }
      }
    }
    // Refit the selected configuration on the whole training fold.
    ucfg.arch = arch_config(o, *best_point);
    const auto [xt, xs] =
        unsup_features(data, split.train_indices, split.test_indices, ucfg, o.multiscale, fold_seed, cache);
    const auto lambdas_full = grid.lambdas.empty() ? lambda_grid(split.train_indices.size()) : grid.lambdas;
    res.lambda = lambdas_full[best_lambda_index];
    const auto clf = train_squared_hinge(xt, train_labels, res.lambda, fold_seed, data.n_classes());
    res.test_accuracy = accuracy(clf, xs, test_y);
  } else {
    if (grid.lambdas.empty()) throw Error(ErrorKind::InvalidArgument, "supervised grid needs lambdas");
    for (const auto& p : points) {
      ucfg.arch = arch_config(o, p);
      const GcknModel init = fit_unsupervised(data, inner, ucfg, fold_seed, &cache);
      for (double lambda : grid.lambdas) {
        SupervisedConfig scfg;
        scfg.epochs = grid.max_epochs;
        scfg.lambda = lambda;
        scfg.on_epoch = [&](const EpochRecord& rec, const GcknModel& m, const LinearClassifier& clf) {
          const PreparedModel prepared(m);
          const Matrix xv = embed_subset(data, val, prepared, 1, &cache);
          Candidate c{accuracy(clf, xv, val_y), heldout_loss(clf, xv, val_y)};
          if (c.better_than(best)) {
            best = c;
            best_point = p;
            const Matrix xs = embed_subset(data, split.test_indices, prepared, 1, &cache);
            res.test_accuracy = accuracy(clf, xs, test_y);
            res.lambda = lambda;
            res.epochs = rec.epoch + 1;
          }
        };
        train_supervised(data, inner, scfg, init, fold_seed, &cache);
      }
    }
  }
  res.val_accuracy = best.val_acc;
  res.sigma = best_point->sigma;
  res.k1 = best_point->k1;
  res.filters = best_point->filters;
  res.local_pooling = best_point->local;
  res.global_pooling = best_point->global;
  return res;
}

}  // namespace

CvResult cv_evaluate(const DatasetBundle& data, const CvGrid& grid, const CvOptions& options) {
  if (options.repeats < 1) throw Error(ErrorKind::InvalidArgument, "repeats must be >= 1");
  if (data.n_classes() < 2) throw Error(ErrorKind::SingleClass, "dataset has a single class");
  expand(grid);
  struct Job {
    int repeat;
    FoldSplit split;
  };
  std::vector<Job> jobs;
  for (int r = 0; r < options.repeats; ++r) {
    for (auto& s : stratified_kfold(data.graph_labels, options.folds, options.seed + static_cast<std::uint64_t>(r))) {
      jobs.push_back({r, std::move(s)});
    }
  }
  PathCache cache(options.path_cap);
  CvResult out;
  out.folds.resize(jobs.size());
  std::mutex log_mutex;
  parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
    out.folds[i] = run_fold(data, grid, options, jobs[i].split, jobs[i].repeat, cache);
    if (options.verbose) {
      std::lock_guard lock(log_mutex);
      std::cerr << "repeat " << jobs[i].repeat << " fold " << jobs[i].split.fold_id << ": test accuracy "
                << out.folds[i].test_accuracy << " (val " << out.folds[i].val_accuracy << ")\n";
    }
  });
  double sum = 0.0;
  for (const auto& f : out.folds) sum += f.test_accuracy;
  out.mean = sum / static_cast<double>(out.folds.size());
  double sq = 0.0;
  for (const auto& f : out.folds) sq += (f.test_accuracy - out.mean) * (f.test_accuracy - out.mean);
  out.stddev = std::sqrt(sq / static_cast<double>(out.folds.size()));
  return out;
}

void write_results_csv(const std::filesystem::path& file, const CvResult& result) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + file.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "repeat,fold,test_accuracy,test_accuracy_std,val_accuracy,sigma,k1,filters,pooling,global_pooling,lambda,epochs,"
         "n_train,n_test\n";
  for (const auto& f : result.folds) {
    out << f.repeat << ',' << f.fold << ',' << f.test_accuracy << ",," << f.val_accuracy << ',' << f.sigma << ','
        << f.k1 << ',' << f.filters << ',' << to_string(f.local_pooling) << ',' << to_string(f.global_pooling) << ','
        << f.lambda << ',' << f.epochs << ',' << f.n_train << ',' << f.n_test << '\n';
  }
  out << "summary,all," << result.mean << ',' << result.stddev << ",,,,,,,,,,\n";
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + file.string());
}

}  // namespace gckn
