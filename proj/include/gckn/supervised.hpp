#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gckn/dataset.hpp"
#include "gckn/engine.hpp"
#include "gckn/model.hpp"
#include "gckn/svm.hpp"

namespace gckn {

struct SampleRef {
  const Graph* graph = nullptr;
  const GraphPaths* paths = nullptr;
  int label = 0;
};

struct BatchGradient {
  ModelGradient model;  // finalized filter gradients
  Matrix weights;       // same shape as clf.weights
  Vector intercepts;
  double objective = 0.0;
};

/// Batch objective (1/B) sum_b sum_h max(0, 1 - t_bh s_bh)^2 + lambda sum_h ||w_h||^2.
double batch_objective(const PreparedModel& model, const LinearClassifier& clf, std::span<const SampleRef> batch);

/// Exact gradient of batch_objective with respect to every filter, w and b.
BatchGradient model_backward(const PreparedModel& model, const LinearClassifier& clf, std::span<const SampleRef> batch,
                             int workers = 1);

/// 0.01 for epochs 0-49, halved every 50 epochs.
double learning_rate_at(int epoch, double initial = 0.01, int halve_every = 50);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  void step(std::vector<Matrix*> params, const std::vector<Matrix>& grads, double lr);
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_acc;
};

struct SupervisedConfig {
  int epochs = 100;
  double initial_lr = 0.01;
  int halve_every = 50;
  int batch_size = 32;
  double lambda = 1e-4;
  int workers = 1;
  bool freeze_filters = false;
  std::vector<std::size_t> validation;  // positions into the dataset, optional
  std::optional<std::filesystem::path> log_file;
  /// Called after each epoch's classifier refit.
  std::function<void(const EpochRecord&, const GcknModel&, const LinearClassifier&)> on_epoch;
};

struct SupervisedResult {
  GcknModel model;
  LinearClassifier classifier;
  std::vector<EpochRecord> history;
};

/// Adam on the filters (per batch) alternating with exact classifier refits
/// (per epoch), starting from `init`. Embedding statistics stay frozen.
SupervisedResult train_supervised(const DatasetBundle& data, std::span<const std::size_t> train,
                                  const SupervisedConfig& config, const GcknModel& init, std::uint64_t seed,
                                  PathCache* cache = nullptr);

/// Embeddings of data.graphs[indices] (rows in order).
Matrix embed_subset(const DatasetBundle& data, std::span<const std::size_t> indices, const PreparedModel& model,
                    int workers, PathCache* cache = nullptr);

}  // namespace gckn
