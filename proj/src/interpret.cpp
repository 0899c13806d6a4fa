#include "gckn/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "gckn/error.hpp"

namespace gckn {

namespace {

double target_loss(const LinearClassifier& clf, const Vector& scores, int target, double* d_score, int* head) {
  int h = target;
  double t = 1.0;
  if (clf.n_classes == 2) {
    h = 0;
    t = target == 1 ? 1.0 : -1.0;
  }
  const double slack = std::max(0.0, 1.0 - t * scores[h]);
  if (d_score) *d_score = -2.0 * slack * t;
  if (head) *head = h;
  return slack * slack;
}

double l1(const PathMask& mask) {
  double s = 0.0;
  for (const auto& m : mask.layers) s += m.cwiseAbs().sum();
  return s;
}

void check_mask(const PathMask& mask, const GraphPaths& paths) {
  if (mask.layers.size() != paths.size()) throw Error(ErrorKind::ShapeMismatch, "mask has the wrong number of layers");
  for (std::size_t j = 0; j < paths.size(); ++j) {
    if (static_cast<std::size_t>(mask.layers[j].size()) != paths[j]->num_paths()) {
      throw Error(ErrorKind::ShapeMismatch, "mask layer " + std::to_string(j + 1) + " has " +
                                                std::to_string(mask.layers[j].size()) + " entries, expected " +
                                                std::to_string(paths[j]->num_paths()));
    }
  }
}

}  // namespace

MaskedOutput masked_forward(const Graph& graph, const PreparedModel& model, const LinearClassifier& clf,
                            const GraphPaths& paths, const PathMask& mask) {
  check_mask(mask, paths);
  MaskedOutput out;
  out.embedding = forward_embedding(model, graph, paths, &mask);
  out.scores = clf.weights * out.embedding + clf.intercepts;
  out.predicted = predict_scores(clf, out.scores);
  return out;
}

double mask_objective(const Graph& graph, const PreparedModel& model, const LinearClassifier& clf,
                      const GraphPaths& paths, const PathMask& mask, int target, double mu) {
  const MaskedOutput o = masked_forward(graph, model, clf, paths, mask);
  return target_loss(clf, o.scores, target, nullptr, nullptr) + mu * l1(mask);
}

MaskResult optimize_mask(const Graph& graph, const PreparedModel& model, const LinearClassifier& clf, double mu,
                         int steps, std::uint64_t) {
  if (!(mu >= 0.0)) throw Error(ErrorKind::InvalidArgument, "mu must be >= 0");
  MaskResult res;
  res.paths = graph_paths(model.model(), graph);
  res.mask = ones_mask(res.paths);
  {
    const Vector e = forward_embedding(model, graph, res.paths);
    res.target = predict_scores(clf, clf.weights * e + clf.intercepts);
  }
  const auto evaluate = [&](const PathMask& m, std::vector<Vector>* grad) {
    ForwardTrace trace;
    const Vector e = forward_embedding(model, graph, res.paths, &m, grad ? &trace : nullptr);
    const Vector scores = clf.weights * e + clf.intercepts;
    double ds = 0.0;
    int head = 0;
    const double loss = target_loss(clf, scores, res.target, &ds, &head);
    if (grad) {
      const Vector d_emb = ds * clf.weights.row(head).transpose();
      backward_embedding(model, graph, res.paths, trace, &m, d_emb, nullptr, grad);
      for (auto& g : *grad) g.array() += mu;
    }
    return loss + mu * l1(m);
  };

  std::vector<Vector> grad;
  double f = evaluate(res.mask, &grad);
  res.objective_history.push_back(f);
  double eta = 1.0;
  for (int it = 0; it < steps; ++it) {
    bool accepted = false;
    double change = 0.0;
    for (int ls = 0; ls < 50; ++ls) {
      PathMask trial = res.mask;
      double sq = 0.0;
      change = 0.0;
      for (std::size_t j = 0; j < trial.layers.size(); ++j) {
        trial.layers[j] = (res.mask.layers[j] - eta * grad[j]).cwiseMax(0.0).cwiseMin(1.0);
        const Vector d = trial.layers[j] - res.mask.layers[j];
        sq += d.squaredNorm();
        if (d.size() > 0) change = std::max(change, d.cwiseAbs().maxCoeff());
      }
      if (change == 0.0) break;
      const double f_trial = evaluate(trial, nullptr);
      if (f_trial <= f - 1e-4 * sq / eta) {
        res.mask = std::move(trial);
        f = f_trial;
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted || change < 1e-9) break;
    res.objective_history.push_back(f);
    grad.clear();
    evaluate(res.mask, &grad);
    eta = std::min(eta * 2.0, 1e6);
  }
  return res;
}

Motif extract_motif(const Graph& graph, const GraphPaths& paths, const PathMask& mask, double threshold) {
  check_mask(mask, paths);
  const std::size_t n = graph.num_nodes();
  std::vector<char> selected_node(n, 0);
  std::map<std::pair<Index, Index>, double> edge_score;
  bool any = false;
  for (std::size_t j = 0; j < paths.size(); ++j) {
    const auto& table = *paths[j];
    for (std::size_t p = 0; p < table.num_paths(); ++p) {
      const double m = mask.layers[j][static_cast<Eigen::Index>(p)];
      if (!(m > threshold)) continue;
      any = true;
      const auto path = table.path(p);
      std::set<std::pair<Index, Index>> seen;
      for (std::size_t b = 0; b < path.size(); ++b) {
        selected_node[static_cast<std::size_t>(path[b])] = 1;
        if (b == 0) continue;
        const auto e = std::minmax(path[b - 1], path[b]);
        if (seen.insert(e).second) edge_score[e] += m;
      }
    }
  }
  if (!any) throw Error(ErrorKind::EmptySelection, "no mask entry exceeds the threshold");

  std::vector<Index> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (const auto& [e, s] : edge_score) {
    const Index a = find(e.first), b = find(e.second);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
  struct Comp {
    std::size_t nodes = 0;
    double score = 0.0;
  };
  std::map<Index, Comp> comps;  // keyed by lowest node (root)
  for (std::size_t u = 0; u < n; ++u) {
    if (selected_node[u]) comps[find(static_cast<Index>(u))].nodes++;
  }
  for (const auto& [e, s] : edge_score) comps[find(e.first)].score += s;
  Index best = -1;
  for (const auto& [root, c] : comps) {
    if (best < 0) {
      best = root;
      continue;
    }
    const Comp& b = comps[best];
    if (c.nodes > b.nodes || (c.nodes == b.nodes && c.score > b.score)) best = root;
  }
  Motif motif;
  for (std::size_t u = 0; u < n; ++u) {
    if (selected_node[u] && find(static_cast<Index>(u)) == best) motif.nodes.push_back(static_cast<Index>(u));
  }
  for (const auto& [e, s] : edge_score) {
    if (find(e.first) == best) {
      motif.edges.push_back({e.first, e.second, s});
      motif.total_score += s;
    }
  }
  return motif;
}

void write_motif_edges(const std::filesystem::path& file, const Motif& motif) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + file.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "# u v score\n";
  for (const auto& e : motif.edges) out << e.u << ' ' << e.v << ' ' << e.score << '\n';
  if (motif.edges.empty()) {
    for (Index u : motif.nodes) out << "# node " << u << '\n';
  }
}

std::string motif_to_dot(const Graph& graph, const Motif& motif) {
  std::ostringstream out;
  out << "graph motif {\n";
  std::vector<int> labels;
  if (graph.is_categorical()) labels = graph.categorical_labels();
  for (Index u : motif.nodes) {
    out << "  n" << u << " [label=\"" << u;
    if (!labels.empty()) out << ":" << (*graph.label_vocabulary())[static_cast<std::size_t>(labels[static_cast<std::size_t>(u)])];
    out << "\"];\n";
  }
  for (const auto& e : motif.edges) {
    out << "  n" << e.u << " -- n" << e.v << " [label=\"" << e.score << "\", penwidth=" << 1.0 + e.score << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace gckn
