// Command-line front end: fit-unsup, fit-sup, cv, embed, gram, interpret.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gckn/cv.hpp"
#include "gckn/dataset.hpp"
#include "gckn/error.hpp"
#include "gckn/exact_kernels.hpp"
#include "gckn/interpret.hpp"
#include "gckn/model.hpp"
#include "gckn/parallel.hpp"
#include "gckn/serialization.hpp"
#include "gckn/simd.hpp"
#include "gckn/supervised.hpp"
#include "gckn/unsupervised.hpp"

namespace fs = std::filesystem;
using namespace gckn;

namespace {

struct Common {
  std::string dataset;
  std::string datadir = "data";
  std::string arch = "subtree";
  int k1 = 3;
  int filters = 32;
  double sigma = 0.5;
  std::string pooling = "sum";
  std::string global_pooling;
  double lambda = 1e-4;
  std::uint64_t seed = 0;
  std::string out;
  std::string model;
  std::size_t cap_paths = kDefaultPathCap;
  int workers = 1;
  std::size_t samples = 300000;
};

const std::vector<std::string> kArchs{"walk", "path", "subtree", "3layer"};
const std::vector<std::string> kPoolings{"sum", "mean", "max"};

void add_dataset(CLI::App* cmd, Common& c) {
  cmd->add_option("--dataset", c.dataset, "TU dataset name")->required();
  cmd->add_option("--datadir", c.datadir, "directory holding <dataset>/<dataset>_*.txt")->capture_default_str();
  cmd->add_option("--cap-paths", c.cap_paths, "per-graph traversal limit")->capture_default_str();
  cmd->add_option("--workers", c.workers, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_arch(CLI::App* cmd, Common& c) {
  cmd->add_option("--arch", c.arch, "architecture")->check(CLI::IsMember(kArchs))->capture_default_str();
  cmd->add_option("--k1", c.k1, "first-layer path length")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--filters", c.filters, "filters per layer")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--sigma", c.sigma, "kernel bandwidth (alpha = 1/sigma^2)")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--pooling", c.pooling, "local pooling")->check(CLI::IsMember(kPoolings))->capture_default_str();
  cmd->add_option("--global-pooling", c.global_pooling, "global pooling (default: local)")->check(CLI::IsMember(kPoolings));
  cmd->add_option("--samples", c.samples, "sampled paths per layer for K-means")->capture_default_str();
  cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
}

DatasetBundle load(const Common& c) { return load_tu_dataset(fs::path(c.datadir) / c.dataset, c.dataset); }

ArchitectureConfig arch_config(const Common& c) {
  ArchitectureConfig a;
  a.arch = parse_architecture(c.arch);
  a.k1 = c.k1;
  a.filters = c.filters;
  a.sigma = c.sigma;
  a.pooling = parse_pooling(c.pooling);
  if (!c.global_pooling.empty()) a.global_pooling = parse_pooling(c.global_pooling);
  return a;
}

// Re-encode node attributes with the model's conventions.
DatasetBundle conform(const DatasetBundle& data, const GcknModel& model) {
  if (model.encoding.mode == AttributeEncoding::Mode::one_hot) {
    if (data.encoding.mode != AttributeEncoding::Mode::one_hot || data.encoding.vocabulary != model.encoding.vocabulary) {
      throw Error(ErrorKind::UnknownLabel, "dataset labels do not match the model's vocabulary");
    }
    return data;
  }
  if (model.encoding.standardized()) return apply_standardization(data, model.encoding);
  return data;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::uint64_t fnv1a(const fs::path& dir, const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename().string().rfind(name + "_", 0) == 0) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    char ch;
    while (in.get(ch)) {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

nlohmann::json option_values(const CLI::App* cmd) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    if (opt->get_name() == "--help") continue;
    const auto& res = opt->results();
    if (!res.empty()) {
      j[opt->get_name()] = res.size() == 1 ? nlohmann::json(res.front()) : nlohmann::json(res);
    } else if (!opt->get_default_str().empty()) {
      j[opt->get_name()] = opt->get_default_str();
    } else if (opt->get_expected_min() == 0) {
      j[opt->get_name()] = false;
    }
  }
  return j;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + file.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph convolutional kernel networks"};
  app.require_subcommand(1);
  Common c;

  auto* fit_unsup = app.add_subcommand("fit-unsup", "learn filters by K-means and save the model");
  add_dataset(fit_unsup, c);
  add_arch(fit_unsup, c);
  std::optional<double> unsup_lambda;
  fit_unsup->add_option("--lambda", unsup_lambda, "also fit a classifier with this regularization");
  fit_unsup->add_option("--out", c.out, "model file")->required();

  auto* fit_sup = app.add_subcommand("fit-sup", "train filters and classifier end to end");
  add_dataset(fit_sup, c);
  add_arch(fit_sup, c);
  int epochs = 100;
  std::string log_file;
  fit_sup->add_option("--lambda", c.lambda, "classifier regularization")->capture_default_str();
  fit_sup->add_option("--epochs", epochs, "epochs")->capture_default_str();
  fit_sup->add_option("--model", c.model, "initial model (default: fit-unsup with the same flags)");
  fit_sup->add_option("--log", log_file, "per-epoch CSV log");
  fit_sup->add_option("--out", c.out, "model file")->required();

  auto* cv = app.add_subcommand("cv", "cross-validated accuracy");
  add_dataset(cv, c);
  std::string mode = "unsup";
  int folds = 10, repeats = 1;
  bool fast = false, verbose = false;
  std::vector<double> grid_sigma, grid_lambda;
  std::vector<int> grid_k1, grid_filters;
  std::vector<std::string> grid_pool, grid_gpool;
  int max_epochs = 0;
  bool single_scale = false;
  cv->add_option("--arch", c.arch, "architecture")->check(CLI::IsMember(kArchs))->capture_default_str();
  cv->add_option("--mode", mode, "unsup or sup")->check(CLI::IsMember({"unsup", "sup"}))->capture_default_str();
  cv->add_option("--folds", folds, "number of folds")->capture_default_str()->check(CLI::Range(2, 1000));
  cv->add_option("--repeats", repeats, "repeated cross validations")->capture_default_str()->check(CLI::PositiveNumber);
  cv->add_option("--seed", c.seed, "random seed")->capture_default_str();
  cv->add_flag("--fast", fast, "reduced desk-scale grid");
  cv->add_option("--sigma", grid_sigma, "override bandwidth grid");
  cv->add_option("--k1", grid_k1, "override path length grid");
  cv->add_option("--filters", grid_filters, "override filter count grid");
  cv->add_option("--pooling", grid_pool, "override local pooling grid")->check(CLI::IsMember(kPoolings));
  cv->add_option("--global-pooling", grid_gpool, "override global pooling grid")->check(CLI::IsMember(kPoolings));
  cv->add_option("--lambda", grid_lambda, "override lambda grid");
  cv->add_option("--epochs", max_epochs, "override supervised epoch budget");
  cv->add_option("--samples", c.samples, "sampled paths per layer for K-means")->capture_default_str();
  cv->add_flag("--single-scale", single_scale, "unsup: only path length k1 instead of concatenating 0..k1");
  cv->add_flag("--verbose", verbose, "per-fold progress on stderr");
  c.out = ".";
  cv->add_option("--out", c.out, "output directory")->capture_default_str();

  auto* embed = app.add_subcommand("embed", "export graph embeddings as CSV");
  add_dataset(embed, c);
  embed->add_option("--model", c.model, "model file")->required();
  std::string embed_out;
  embed->add_option("--out", embed_out, "CSV file")->required();

  auto* gram = app.add_subcommand("gram", "exact kernel Gram matrix as CSV");
  add_dataset(gram, c);
  std::string kernel = "wl";
  int k = 3;
  std::string gram_out;
  gram->add_option("--kernel", kernel, "path, walk, wl or k2")->check(CLI::IsMember({"path", "walk", "wl", "k2"}))->capture_default_str();
  gram->add_option("--k", k, "length / iterations")->check(CLI::NonNegativeNumber)->capture_default_str();
  gram->add_option("--out", gram_out, "CSV file")->required();

  auto* interp = app.add_subcommand("interpret", "select prediction-preserving paths and extract motifs");
  add_dataset(interp, c);
  interp->add_option("--model", c.model, "model file with a classifier")->required();
  double mu = 0.01, threshold = 0.5;
  int steps = 300;
  std::vector<std::size_t> graph_ids;
  std::string interp_out = ".";
  interp->add_option("--mu", mu, "L1 weight")->capture_default_str();
  interp->add_option("--threshold", threshold, "selection threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  interp->add_option("--steps", steps, "optimizer iterations")->capture_default_str();
  interp->add_option("--graph", graph_ids, "graph indices (default: all)");
  interp->add_option("--seed", c.seed, "random seed")->capture_default_str();
  interp->add_option("--out", interp_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fit_unsup) {
      const DatasetBundle data = load(c);
      UnsupervisedConfig cfg;
      cfg.arch = arch_config(c);
      cfg.n_samples = c.samples;
      cfg.workers = c.workers;
      PathCache cache(c.cap_paths);
      const auto idx = all_indices(data.size());
      const GcknModel model = fit_unsupervised(data, idx, cfg, c.seed, &cache);
      if (unsup_lambda) {
        const PreparedModel prepared(model);
        const Matrix x = embed_graphs(data.graphs, prepared, c.workers, &cache);
        const auto clf = train_squared_hinge(x, data.graph_labels, *unsup_lambda, c.seed, data.n_classes());
        std::cout << "training accuracy " << accuracy(clf, x, data.graph_labels) << "\n";
        save_model(model, c.out, &clf);
      } else {
        save_model(model, c.out);
      }
      return 0;
    }
    if (*fit_sup) {
      const DatasetBundle data = load(c);
      PathCache cache(c.cap_paths);
      const auto idx = all_indices(data.size());
      GcknModel init;
      if (!c.model.empty()) {
        init = load_model(c.model);
      } else {
        UnsupervisedConfig cfg;
        cfg.arch = arch_config(c);
        cfg.n_samples = c.samples;
        cfg.workers = c.workers;
        init = fit_unsupervised(data, idx, cfg, c.seed, &cache);
      }
      SupervisedConfig scfg;
      scfg.epochs = epochs;
      scfg.lambda = c.lambda;
      scfg.workers = c.workers;
      if (!log_file.empty()) scfg.log_file = fs::path(log_file);
      const auto res = train_supervised(conform(data, init), idx, scfg, init, c.seed, &cache);
      if (!res.history.empty()) std::cout << "training accuracy " << res.history.back().train_acc << "\n";
      save_model(res.model, c.out, &res.classifier);
      return 0;
    }
    if (*cv) {
      const DatasetBundle data = load(c);
      const TrainingMode m = parse_training_mode(mode);
      CvGrid grid = fast ? fast_grid(m) : default_grid(m);
      if (!grid_sigma.empty()) grid.sigmas = grid_sigma;
      if (!grid_k1.empty()) grid.k1s = grid_k1;
      if (!grid_filters.empty()) grid.filters = grid_filters;
      if (!grid_lambda.empty()) grid.lambdas = grid_lambda;
      if (max_epochs > 0) grid.max_epochs = max_epochs;
      if (!grid_pool.empty()) {
        grid.local_pooling.clear();
        for (const auto& p : grid_pool) grid.local_pooling.push_back(parse_pooling(p));
      }
      if (!grid_gpool.empty()) {
        grid.global_pooling.clear();
        for (const auto& p : grid_gpool) grid.global_pooling.push_back(parse_pooling(p));
      }
      CvOptions opts;
      opts.arch = parse_architecture(c.arch);
      opts.mode = m;
      opts.folds = folds;
      opts.repeats = repeats;
      opts.seed = c.seed;
      opts.workers = c.workers;
      opts.n_samples = c.samples;
      opts.path_cap = c.cap_paths;
      opts.multiscale = !single_scale;
      opts.verbose = verbose;
      const CvResult result = cv_evaluate(data, grid, opts);
      fs::create_directories(c.out);
      write_results_csv(fs::path(c.out) / "results.csv", result);
      nlohmann::json manifest;
      manifest["command"] = "cv";
      manifest["options"] = option_values(cv);
      manifest["seed"] = c.seed;
      manifest["dataset"] = {{"name", data.name},
                             {"graphs", data.size()},
                             {"classes", data.n_classes()},
                             {"fnv1a64", fnv1a(fs::path(c.datadir) / c.dataset, c.dataset)}};
      manifest["versions"] = {{"gckn", "1.0.0"},
                              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                            "." + std::to_string(EIGEN_MINOR_VERSION)},
                              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                              {"cli11", CLI11_VERSION},
                              {"compiler", __VERSION__},
                              {"simd", std::string(simd::isa_name(simd::active_isa()))}};
      manifest["result"] = {{"mean", result.mean}, {"std", result.stddev}, {"folds", result.folds.size()}};
      write_text(fs::path(c.out) / "manifest.json", manifest.dump(2) + "\n");
      std::cout << "accuracy " << result.mean << " +/- " << result.stddev << "\n";
      return 0;
    }
    if (*embed) {
      const GcknModel model = load_model(c.model);
      const DatasetBundle data = conform(load(c), model);
      PathCache cache(c.cap_paths);
      const PreparedModel prepared(model);
      const Matrix x = embed_graphs(data.graphs, prepared, c.workers, &cache);
      const auto segs = model.segments();
      write_embeddings_csv(embed_out, x, segs);
      return 0;
    }
    if (*gram) {
      const DatasetBundle data = load(c);
      const std::map<std::string, ExactKernel> kinds{
          {"path", ExactKernel::path}, {"walk", ExactKernel::walk}, {"wl", ExactKernel::wl}, {"k2", ExactKernel::k2_dirac}};
      const Matrix g = exact_gram_matrix(data.graphs, kinds.at(kernel), k, c.workers);
      write_matrix_csv(gram_out, g);
      return 0;
    }
    if (*interp) {
      const GcknModel model = load_model(c.model);
      const auto clf = load_classifier(c.model);
      if (!clf) throw Error(ErrorKind::InvalidArgument, "model file carries no classifier");
      const DatasetBundle data = conform(load(c), model);
      const PreparedModel prepared(model);
      if (graph_ids.empty()) graph_ids = all_indices(data.size());
      fs::create_directories(interp_out);
      for (std::size_t gi : graph_ids) {
        if (gi >= data.size()) throw Error(ErrorKind::IndexOutOfRange, "graph index " + std::to_string(gi));
        const Graph& g = data.graphs[gi];
        const MaskResult res = optimize_mask(g, prepared, *clf, mu, steps, c.seed);
        const std::string stem = "graph" + std::to_string(gi);
        try {
          const Motif motif = extract_motif(g, res.paths, res.mask, threshold);
          write_motif_edges(fs::path(interp_out) / (stem + "_motif.txt"), motif);
          write_text(fs::path(interp_out) / (stem + "_motif.dot"), motif_to_dot(g, motif));
          std::cout << stem << ": predicted " << res.target << ", motif with " << motif.nodes.size() << " nodes, "
                    << motif.edges.size() << " edges\n";
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::EmptySelection) throw;
          std::cout << stem << ": predicted " << res.target << ", no path selected\n";
        }
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
