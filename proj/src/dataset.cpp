#include "gckn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string_view>

#include "gckn/error.hpp"

namespace gckn {
namespace {

namespace fs = std::filesystem;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ',' || line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ',' && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view token, const fs::path& file, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw Error(ErrorKind::ParseError, file.string() + ":" + std::to_string(line_no) + ": bad number '" +
                                           std::string(token) + "'");
  }
  return value;
}

std::vector<std::vector<std::string_view>> read_rows(const fs::path& file, std::string& storage) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, file.string());
  storage.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  std::vector<std::vector<std::string_view>> rows;
  std::string_view all(storage);
  std::size_t start = 0;
  while (start < all.size()) {
    std::size_t end = all.find('\n', start);
    if (end == std::string_view::npos) end = all.size();
    auto fields = split_fields(all.substr(start, end - start));
    if (!fields.empty()) rows.push_back(std::move(fields));
    start = end + 1;
  }
  return rows;
}

std::vector<std::int64_t> read_int_column(const fs::path& file) {
  std::string storage;
  const auto rows = read_rows(file, storage);
  std::vector<std::int64_t> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(parse_number<std::int64_t>(rows[i][0], file, i + 1));
  return out;
}

}  // namespace

DatasetBundle DatasetBundle::subset(std::span<const std::size_t> indices) const {
  DatasetBundle out;
  out.name = name;
  out.class_values = class_values;
  out.encoding = encoding;
  out.graphs.reserve(indices.size());
  out.graph_labels.reserve(indices.size());
  for (auto i : indices) {
    out.graphs.push_back(graphs.at(i));
    out.graph_labels.push_back(graph_labels.at(i));
  }
  return out;
}

DatasetBundle load_tu_dataset(const fs::path& directory, const std::string& name) {
  const auto file = [&](const char* suffix) { return directory / (name + suffix); };
  for (const char* required : {"_A.txt", "_graph_indicator.txt", "_graph_labels.txt"}) {
    if (!fs::exists(file(required))) throw Error(ErrorKind::MissingFile, file(required).string());
  }

  const auto indicator = read_int_column(file("_graph_indicator.txt"));
  const auto raw_graph_labels = read_int_column(file("_graph_labels.txt"));
  const std::size_t n_nodes_total = indicator.size();
  const std::size_t n_graphs = raw_graph_labels.size();

  // Graph ids must be 1..n_graphs, nondecreasing, each present.
  std::vector<std::size_t> graph_start(n_graphs + 1, 0);
  std::int64_t prev = 0;
  for (std::size_t i = 0; i < n_nodes_total; ++i) {
    const auto gid = indicator[i];
    if (gid < 1 || static_cast<std::size_t>(gid) > n_graphs || gid < prev || gid > prev + 1) {
      throw Error(ErrorKind::NonContiguousGraphIds, "node " + std::to_string(i + 1) + " has graph id " +
                                                        std::to_string(gid));
    }
    if (gid != prev) graph_start[static_cast<std::size_t>(gid) - 1] = i;
    prev = gid;
  }
  if (static_cast<std::size_t>(prev) != n_graphs) {
    throw Error(ErrorKind::NonContiguousGraphIds, "graph ids stop at " + std::to_string(prev) + " but " +
                                                      std::to_string(n_graphs) + " graph labels were given");
  }
  graph_start[n_graphs] = n_nodes_total;

  // Node attributes.
  const bool has_labels = fs::exists(file("_node_labels.txt"));
  const bool has_attrs = fs::exists(file("_node_attributes.txt"));
  if (fs::exists(file("_edge_labels.txt")) || fs::exists(file("_edge_attributes.txt"))) {
    warn(name + ": edge labels/attributes are ignored");
  }

  std::vector<std::int64_t> node_labels;
  std::vector<std::int64_t> vocab;
  if (has_labels) {
    node_labels = read_int_column(file("_node_labels.txt"));
    if (node_labels.size() != n_nodes_total) {
      throw Error(ErrorKind::InconsistentNodeCount, "node_labels has " + std::to_string(node_labels.size()) +
                                                        " rows, indicator has " + std::to_string(n_nodes_total));
    }
    vocab = make_vocabulary(node_labels);
  }
  Matrix continuous;
  if (has_attrs) {
    std::string storage;
    const auto rows = read_rows(file("_node_attributes.txt"), storage);
    if (rows.size() != n_nodes_total) {
      throw Error(ErrorKind::InconsistentNodeCount, "node_attributes has " + std::to_string(rows.size()) +
                                                        " rows, indicator has " + std::to_string(n_nodes_total));
    }
    const std::size_t dim = rows.front().size();
    continuous.resize(static_cast<Eigen::Index>(n_nodes_total), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != dim) {
        throw Error(ErrorKind::AttributeShapeMismatch, "node attribute row " + std::to_string(i + 1) +
                                                           " has a different dimension");
      }
      for (std::size_t c = 0; c < dim; ++c) {
        continuous(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            parse_number<double>(rows[i][c], file("_node_attributes.txt"), i + 1);
      }
    }
  }

  // Edges, grouped per graph and deduplicated.
  std::vector<std::set<Edge>> graph_edges(n_graphs);
  {
    std::string storage;
    const auto path_a = file("_A.txt");
    const auto rows = read_rows(path_a, storage);
    std::size_t self_loops = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() < 2) throw Error(ErrorKind::ParseError, path_a.string() + ":" + std::to_string(i + 1));
      const auto a = parse_number<std::int64_t>(rows[i][0], path_a, i + 1);
      const auto b = parse_number<std::int64_t>(rows[i][1], path_a, i + 1);
      if (a < 1 || b < 1 || static_cast<std::size_t>(a) > n_nodes_total || static_cast<std::size_t>(b) > n_nodes_total) {
        throw Error(ErrorKind::IndexOutOfRange, path_a.string() + ":" + std::to_string(i + 1));
      }
      const auto ga = indicator[static_cast<std::size_t>(a - 1)];
      if (ga != indicator[static_cast<std::size_t>(b - 1)]) {
        throw Error(ErrorKind::ParseError, "edge crosses graphs at " + path_a.string() + ":" + std::to_string(i + 1));
      }
      if (a == b) {
        ++self_loops;
        continue;
      }
      const auto g = static_cast<std::size_t>(ga - 1);
      const auto base = static_cast<std::int64_t>(graph_start[g]);
      const auto u = static_cast<Index>(a - 1 - base);
      const auto v = static_cast<Index>(b - 1 - base);
      graph_edges[g].insert(u < v ? Edge{u, v} : Edge{v, u});
    }
    if (self_loops > 0) warn(name + ": dropped " + std::to_string(self_loops) + " self-loop records");
  }

  DatasetBundle out;
  out.name = name;
  out.class_values = make_vocabulary(raw_graph_labels);
  for (auto raw : raw_graph_labels) {
    const auto it = std::lower_bound(out.class_values.begin(), out.class_values.end(), raw);
    out.graph_labels.push_back(static_cast<int>(it - out.class_values.begin()));
  }

  const std::size_t onehot_width = has_labels ? vocab.size() : 0;
  const std::size_t cont_width = has_attrs ? static_cast<std::size_t>(continuous.cols()) : 0;
  out.graphs.reserve(n_graphs);
  for (std::size_t g = 0; g < n_graphs; ++g) {
    const std::size_t begin = graph_start[g];
    const std::size_t n = graph_start[g + 1] - begin;
    std::vector<Edge> edges(graph_edges[g].begin(), graph_edges[g].end());
    if (!has_labels && !has_attrs) {
      // Placeholder attributes; replaced by dataset-wide degrees below.
      out.graphs.push_back(Graph::build(n, std::move(edges), Matrix::Ones(static_cast<Eigen::Index>(n), 1)));
      continue;
    }
    Matrix attrs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(onehot_width + cont_width));
    if (has_labels) {
      std::span<const std::int64_t> lbl(node_labels.data() + begin, n);
      attrs.leftCols(static_cast<Eigen::Index>(onehot_width)) = one_hot_encode(lbl, vocab);
    }
    if (has_attrs) {
      attrs.rightCols(static_cast<Eigen::Index>(cont_width)) =
          continuous.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(n));
    }
    std::optional<std::vector<std::int64_t>> graph_vocab;
    if (has_labels && !has_attrs) graph_vocab = vocab;
    out.graphs.push_back(Graph::build(n, std::move(edges), std::move(attrs), std::move(graph_vocab)));
  }

  if (!has_labels && !has_attrs) {
    out.graphs = degrees_as_labels(out.graphs);
    out.encoding.mode = AttributeEncoding::Mode::one_hot;
    out.encoding.vocabulary = *out.graphs.front().label_vocabulary();
  } else if (has_labels && !has_attrs) {
    out.encoding.mode = AttributeEncoding::Mode::one_hot;
    out.encoding.vocabulary = vocab;
  } else {
    out.encoding.mode = AttributeEncoding::Mode::continuous;
    out.encoding.vocabulary = vocab;  // width of the leading one-hot block, if any
  }
  return out;
}

std::pair<DatasetBundle, AttributeEncoding> standardize_attributes(const DatasetBundle& train) {
  if (train.encoding.mode != AttributeEncoding::Mode::continuous) {
    throw Error(ErrorKind::InvalidArgument, "standardize_attributes needs continuous attributes");
  }
  const std::size_t dim = train.attribute_dim();
  const std::size_t first = train.encoding.vocabulary.size();
  std::vector<double> sum(dim, 0.0);
  std::size_t count = 0;
  for (const auto& g : train.graphs) {
    for (Eigen::Index r = 0; r < g.attributes().rows(); ++r) {
      for (std::size_t c = first; c < dim; ++c) sum[c] += g.attributes()(r, static_cast<Eigen::Index>(c));
    }
    count += g.num_nodes();
  }
  AttributeEncoding enc = train.encoding;
  enc.mean.assign(dim, 0.0);
  enc.stddev.assign(dim, 1.0);
  if (count == 0) return {train, enc};
  for (std::size_t c = first; c < dim; ++c) enc.mean[c] = sum[c] / static_cast<double>(count);
  std::vector<double> sq(dim, 0.0);
  for (const auto& g : train.graphs) {
    for (Eigen::Index r = 0; r < g.attributes().rows(); ++r) {
      for (std::size_t c = first; c < dim; ++c) {
        const double d = g.attributes()(r, static_cast<Eigen::Index>(c)) - enc.mean[c];
        sq[c] += d * d;
      }
    }
  }
  for (std::size_t c = first; c < dim; ++c) {
    const double sd = std::sqrt(sq[c] / static_cast<double>(count));
    enc.stddev[c] = sd > 0.0 ? sd : 1.0;
  }
  return {apply_standardization(train, enc), enc};
}

DatasetBundle apply_standardization(const DatasetBundle& data, const AttributeEncoding& encoding) {
  DatasetBundle out = data;
  out.encoding = encoding;
  const auto dim = static_cast<Eigen::Index>(encoding.mean.size());
  for (auto& g : out.graphs) {
    if (g.attributes().cols() != dim) throw Error(ErrorKind::DimensionMismatch, "standardization width mismatch");
    Matrix attrs = g.attributes();
    for (Eigen::Index c = 0; c < dim; ++c) {
      attrs.col(c).array() = (attrs.col(c).array() - encoding.mean[static_cast<std::size_t>(c)]) /
                             encoding.stddev[static_cast<std::size_t>(c)];
    }
    g = g.with_attributes(std::move(attrs), std::nullopt);
  }
  return out;
}

Graph invert_standardization(const Graph& graph, const AttributeEncoding& encoding) {
  Matrix attrs = graph.attributes();
  for (Eigen::Index c = 0; c < attrs.cols(); ++c) {
    attrs.col(c).array() = attrs.col(c).array() * encoding.stddev[static_cast<std::size_t>(c)] +
                           encoding.mean[static_cast<std::size_t>(c)];
  }
  return graph.with_attributes(std::move(attrs), std::nullopt);
}

std::vector<FoldSplit> stratified_kfold(std::span<const int> labels, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw Error(ErrorKind::InvalidArgument, "n_folds must be >= 2");
  if (static_cast<std::size_t>(n_folds) > labels.size()) {
    throw Error(ErrorKind::TooFewSamples, std::to_string(n_folds) + " folds for " + std::to_string(labels.size()) +
                                              " samples");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<int> assignment(labels.size(), 0);
  std::size_t cursor = 0;
  for (auto& [cls, members] : by_class) {
    if (members.size() < static_cast<std::size_t>(n_folds)) {
      warn("class " + std::to_string(cls) + " has " + std::to_string(members.size()) + " members for " +
           std::to_string(n_folds) + " folds");
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (auto idx : members) assignment[idx] = static_cast<int>(cursor++ % static_cast<std::size_t>(n_folds));
  }

  std::vector<FoldSplit> folds(static_cast<std::size_t>(n_folds));
  for (int f = 0; f < n_folds; ++f) folds[static_cast<std::size_t>(f)].fold_id = f;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int f = 0; f < n_folds; ++f) {
      auto& fold = folds[static_cast<std::size_t>(f)];
      (assignment[i] == f ? fold.test_indices : fold.train_indices).push_back(i);
    }
  }
  return folds;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(std::span<const int> labels,
                                                                                 double fraction,
                                                                                 std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<char> held(labels.size(), 0);
  for (auto& [cls, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    auto n_held = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(members.size())));
    if (n_held == 0 && members.size() >= 2) n_held = 1;
    if (n_held >= members.size()) n_held = members.size() - 1;
    for (std::size_t j = 0; j < n_held; ++j) held[members[j]] = 1;
  }
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < labels.size(); ++i) (held[i] ? out.second : out.first).push_back(i);
  return out;
}

}  // namespace gckn
