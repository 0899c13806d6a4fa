#include "gckn/supervised.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "gckn/error.hpp"
#include "gckn/parallel.hpp"

namespace gckn {

namespace {

struct SampleResult {
  ModelGradient model;
  Vector embedding;
  Vector d_scores;
  double loss = 0.0;
};

// loss and d loss / d scores of one sample for every head
double sample_loss(const LinearClassifier& clf, const Vector& scores, int label, Vector* d_scores) {
  double loss = 0.0;
  if (d_scores) d_scores->resize(scores.size());
  for (Eigen::Index h = 0; h < scores.size(); ++h) {
    const double t = head_target(clf.n_classes, static_cast<int>(h), label);
    const double slack = std::max(0.0, 1.0 - t * scores[h]);
    loss += slack * slack;
    if (d_scores) (*d_scores)[h] = -2.0 * slack * t;
  }
  return loss;
}

Vector scores_of(const LinearClassifier& clf, const Vector& e) { return clf.weights * e + clf.intercepts; }

}  // namespace

double batch_objective(const PreparedModel& model, const LinearClassifier& clf, std::span<const SampleRef> batch) {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
  double loss = 0.0;
  for (const auto& s : batch) {
    const Vector e = forward_embedding(model, *s.graph, *s.paths);
    loss += sample_loss(clf, scores_of(clf, e), s.label, nullptr);
  }
  return loss / static_cast<double>(batch.size()) + clf.lambda * clf.weights.squaredNorm();
}

BatchGradient model_backward(const PreparedModel& model, const LinearClassifier& clf, std::span<const SampleRef> batch,
                             int workers) {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<SampleResult> parts(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    const auto& s = batch[i];
    ForwardTrace trace;
    SampleResult& r = parts[i];
    r.embedding = forward_embedding(model, *s.graph, *s.paths, nullptr, &trace);
    r.loss = sample_loss(clf, scores_of(clf, r.embedding), s.label, &r.d_scores);
    r.model = ModelGradient::zeros_like(model.model());
    if (r.d_scores.cwiseAbs().maxCoeff() == 0.0) return;
    const Vector d_emb = inv_b * (clf.weights.transpose() * r.d_scores);
    backward_embedding(model, *s.graph, *s.paths, trace, nullptr, d_emb, &r.model, nullptr);
  });
  BatchGradient out;
  out.model = ModelGradient::zeros_like(model.model());
  out.weights = 2.0 * clf.lambda * clf.weights;
  out.intercepts = Vector::Zero(clf.intercepts.size());
  double loss = 0.0;
  for (const auto& r : parts) {
    out.model.add(r.model);
    out.weights += inv_b * r.d_scores * r.embedding.transpose();
    out.intercepts += inv_b * r.d_scores;
    loss += r.loss;
  }
  finalize_gradient(model, out.model);
  out.objective = loss * inv_b + clf.lambda * clf.weights.squaredNorm();
  return out;
}

double learning_rate_at(int epoch, double initial, int halve_every) {
  return initial * std::pow(0.5, static_cast<double>(epoch / std::max(1, halve_every)));
}

void AdamState::step(std::vector<Matrix*> params, const std::vector<Matrix>& grads, double lr) {
  if (m.empty()) {
    for (const Matrix* p : params) {
      m.push_back(Matrix::Zero(p->rows(), p->cols()));
      v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++step_count;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (std::size_t j = 0; j < params.size(); ++j) {
    m[j] = beta1 * m[j] + (1.0 - beta1) * grads[j];
    v[j] = beta2 * v[j] + (1.0 - beta2) * grads[j].cwiseProduct(grads[j]);
    const Matrix m_hat = m[j] / c1;
    const Matrix v_hat = v[j] / c2;
    *params[j] -= lr * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + eps).matrix());
  }
}

Matrix embed_subset(const DatasetBundle& data, std::span<const std::size_t> indices, const PreparedModel& model,
                    int workers, PathCache* cache) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(model.model().embedding_dim()));
  parallel_for(indices.size(), workers, [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) =
        model_forward(data.graphs[indices[i]], model, cache, indices[i]).vector.transpose();
  });
  return out;
}

SupervisedResult train_supervised(const DatasetBundle& data, std::span<const std::size_t> train,
                                  const SupervisedConfig& config, const GcknModel& init, std::uint64_t seed,
                                  PathCache* cache) {
  if (train.empty()) throw Error(ErrorKind::InvalidArgument, "empty training set");
  if (config.batch_size < 1 || config.epochs < 0) throw Error(ErrorKind::InvalidArgument, "bad epoch/batch settings");
  init.validate();
  if (init.input_dim() != static_cast<int>(data.attribute_dim())) {
    throw Error(ErrorKind::DimensionMismatch, "initial model does not match the dataset attributes");
  }
  for (const auto& layer : init.layers) {
    if (layer.pooling == Pooling::max) warn("max pooling gives subgradients only");
  }

  std::vector<GraphPaths> paths(train.size());
  parallel_for(train.size(), config.workers, [&](std::size_t i) {
    paths[i] = graph_paths(init, data.graphs[train[i]], cache ? cache->cap() : kDefaultPathCap, cache, train[i]);
  });
  std::vector<int> labels;
  for (std::size_t i : train) labels.push_back(data.graph_labels[i]);
  std::vector<int> val_labels;
  for (std::size_t i : config.validation) val_labels.push_back(data.graph_labels[i]);

  SupervisedResult result;
  result.model = init;
  const auto refit = [&](const PreparedModel& prepared) {
    const Matrix x = embed_subset(data, train, prepared, config.workers, cache);
    result.classifier = train_squared_hinge(x, labels, config.lambda, seed, data.n_classes());
    return x;
  };
  refit(PreparedModel(result.model));

  std::ofstream log;
  if (config.log_file) {
    log.open(*config.log_file);
    if (!log) throw Error(ErrorKind::IoError, "cannot write " + config.log_file->string());
    log << "epoch,lr,train_loss,train_acc,val_acc\n";
    log.precision(std::numeric_limits<double>::max_digits10);
  }

  std::mt19937_64 gen(seed);
  AdamState adam;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  bool lr_halved = false;
  double lr_scale = 1.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate_at(epoch, config.initial_lr, config.halve_every);
    if (!config.freeze_filters) {
      std::shuffle(order.begin(), order.end(), gen);
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        std::vector<SampleRef> batch;
        for (std::size_t b = start; b < stop; ++b) {
          const std::size_t i = order[b];
          batch.push_back({&data.graphs[train[i]], &paths[i], labels[i]});
        }
        const PreparedModel prepared(result.model);
        const BatchGradient grad = model_backward(prepared, result.classifier, batch, config.workers);
        bool finite = true;
        for (const auto& g : grad.model.filters) finite = finite && g.allFinite();
        if (!finite) {
          if (lr_halved) throw Error(ErrorKind::NonFinite, "gradient is not finite after halving the learning rate");
          warn("NonFinite gradient; halving the learning rate and skipping the batch");
          lr_halved = true;
          lr_scale *= 0.5;
          continue;
        }
        std::vector<Matrix*> params;
        for (auto& layer : result.model.layers) params.push_back(&layer.filters);
        const GcknModel before = result.model;
        adam.step(params, grad.model.filters, lr * lr_scale);
        for (auto& layer : result.model.layers) normalize_filters(layer);
        try {
          PreparedModel check(result.model);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::EigenFailure && e.kind() != ErrorKind::NonFinite) throw;
          if (lr_halved) throw;
          warn(std::string(e.what()) + "; halving the learning rate and retrying");
          lr_halved = true;
          lr_scale *= 0.5;
          result.model = before;
        }
      }
    }
    const PreparedModel prepared(result.model);
    const Matrix x = refit(prepared);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr * lr_scale;
    rec.train_loss = svm_objective(result.classifier, x, labels);
    rec.train_acc = accuracy(result.classifier, x, labels);
    if (!config.validation.empty()) {
      const Matrix xv = embed_subset(data, config.validation, prepared, config.workers, cache);
      rec.val_acc = accuracy(result.classifier, xv, val_labels);
    }
    result.history.push_back(rec);
    if (log) {
      log << rec.epoch << ',' << rec.lr << ',' << rec.train_loss << ',' << rec.train_acc << ',';
      if (rec.val_acc) log << *rec.val_acc;
      log << '\n';
    }
    if (config.on_epoch) config.on_epoch(rec, result.model, result.classifier);
  }
  return result;
}

}  // namespace gckn
