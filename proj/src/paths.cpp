#include "gckn/paths.hpp"

#include <mutex>
#include <string>

#include "gckn/error.hpp"

namespace gckn {

PathTable::PathTable(int k, TraversalMode mode, std::size_t n_nodes) : k_(k), mode_(mode), offsets_(n_nodes + 1, 0) {
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "path length must be >= 0");
}

namespace {

class Enumerator {
 public:
  Enumerator(const Graph& g, int k, TraversalMode mode, std::size_t cap)
      : graph_(g), k_(k), simple_(mode == TraversalMode::path), cap_(cap), table_(k, mode, g.num_nodes()),
        on_path_(g.num_nodes(), 0) {
    stack_.reserve(static_cast<std::size_t>(k) + 1);
  }

  PathTable run() {
    for (std::size_t u = 0; u < graph_.num_nodes(); ++u) {
      extend(static_cast<Index>(u));
      table_.close_node(static_cast<Index>(u));
    }
    return std::move(table_);
  }

 private:
  void extend(Index u) {
    stack_.push_back(u);
    on_path_[static_cast<std::size_t>(u)] += 1;
    if (stack_.size() == static_cast<std::size_t>(k_) + 1) {
      if (table_.num_paths() >= cap_) {
        throw Error(ErrorKind::PathCapExceeded, "more than " + std::to_string(cap_) + " traversals of length " +
                                                    std::to_string(k_));
      }
      table_.append(stack_);
    } else {
      for (Index v : graph_.neighbors(u)) {
        if (simple_ && on_path_[static_cast<std::size_t>(v)]) continue;
        extend(v);
      }
    }
    on_path_[static_cast<std::size_t>(u)] -= 1;
    stack_.pop_back();
  }

  const Graph& graph_;
  int k_;
  bool simple_;
  std::size_t cap_;
  PathTable table_;
  std::vector<Index> stack_;
  std::vector<int> on_path_;
};

}  // namespace

PathTable enumerate(const Graph& graph, int k, TraversalMode mode, std::size_t cap) {
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "path length must be >= 0");
  return Enumerator(graph, k, mode, cap).run();
}

PathTable enumerate_paths(const Graph& graph, int k, std::size_t cap) {
  return enumerate(graph, k, TraversalMode::path, cap);
}

PathTable enumerate_walks(const Graph& graph, int k, std::size_t cap) {
  return enumerate(graph, k, TraversalMode::walk, cap);
}

Vector path_attribute_vector(const Graph& graph, std::span<const Index> path) {
  const auto q = static_cast<Eigen::Index>(graph.attribute_dim());
  Vector out(q * static_cast<Eigen::Index>(path.size()));
  for (std::size_t j = 0; j < path.size(); ++j) {
    out.segment(static_cast<Eigen::Index>(j) * q, q) = graph.attributes().row(path[j]).transpose();
  }
  return out;
}

std::shared_ptr<const PathTable> PathCache::get(std::size_t graph_index, const Graph& graph, int k,
                                                TraversalMode mode) {
  const Key key{graph_index, k, static_cast<int>(mode)};
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  auto table = std::make_shared<const PathTable>(enumerate(graph, k, mode, cap_));
  std::unique_lock lock(mutex_);
  entries_[key] = table;
  return table;
}

std::size_t PathCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace gckn
