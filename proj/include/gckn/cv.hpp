#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gckn/dataset.hpp"
#include "gckn/model.hpp"

namespace gckn {

enum class TrainingMode { unsup, sup };

TrainingMode parse_training_mode(const std::string& name);
std::string to_string(TrainingMode mode);

struct CvGrid {
  std::vector<double> sigmas;
  std::vector<int> k1s;
  std::vector<int> filters;
  std::vector<Pooling> local_pooling;
  std::vector<Pooling> global_pooling;
  std::vector<double> lambdas;  // empty in unsup mode: (1/n) logspace(-3, 4, 60) per training set
  int max_epochs = 350;         // sup mode; every epoch up to this is a candidate
};

/// Full search ranges per training mode.
CvGrid default_grid(TrainingMode mode);
/// Desk-scale grid: sigma in {0.4, 0.6}, k1 in {2, 3}, fixed pooling.
CvGrid fast_grid(TrainingMode mode);

struct CvOptions {
  Architecture arch = Architecture::subtree;
  TrainingMode mode = TrainingMode::unsup;
  int folds = 10;
  int repeats = 1;
  std::uint64_t seed = 0;
  int workers = 1;
  std::size_t n_samples = 300000;
  double validation_fraction = 0.1;
  std::size_t path_cap = kDefaultPathCap;
  // unsup only: features are the concatenation of models fit with k1 = 0..k1
  bool multiscale = true;
  bool verbose = false;
};

struct FoldResult {
  int repeat = 0;
  int fold = 0;
  double test_accuracy = 0.0;
  double val_accuracy = 0.0;
  double sigma = 0.0;
  int k1 = 0;
  int filters = 0;
  Pooling local_pooling = Pooling::sum;
  Pooling global_pooling = Pooling::sum;
  double lambda = 0.0;
  int epochs = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct CvResult {
  std::vector<FoldResult> folds;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Per fold: every grid point is fit on 90% of the training fold and scored
/// on the held-out 10%; the best one (validation accuracy, then lower
/// validation loss) is refit on the whole training fold (unsup) or taken at
/// its best epoch (sup) and evaluated on the test fold.
CvResult cv_evaluate(const DatasetBundle& data, const CvGrid& grid, const CvOptions& options);

void write_results_csv(const std::filesystem::path& file, const CvResult& result);

}  // namespace gckn
