#include "gckn/serialization.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gckn/error.hpp"
#include "gckn/io_util.hpp"

namespace gckn {

using nlohmann::json;

namespace {

json pack_matrix(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_doubles({m.data(), static_cast<std::size_t>(m.size())})}};
}

Matrix unpack_matrix(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (rows < 0 || cols < 0) throw Error(ErrorKind::CorruptModel, "negative matrix shape");
  const auto values = decode_doubles(j.at("data").get<std::string>());
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw Error(ErrorKind::CorruptModel, "matrix payload does not match its shape");
  }
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

json pack_vector(std::span<const double> v) { return encode_doubles(v); }

Vector unpack_vector(const json& j) {
  const auto values = decode_doubles(j.get<std::string>());
  Vector v(static_cast<Eigen::Index>(values.size()));
  std::copy(values.begin(), values.end(), v.data());
  return v;
}

json parse_document(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptModel, std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "gckn-model") {
    throw Error(ErrorKind::CorruptModel, "not a model document");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    throw Error(ErrorKind::CorruptModel, "model document has no version");
  }
  const int version = doc["version"].get<int>();
  if (version != kModelSchemaVersion) {
    throw Error(ErrorKind::SchemaVersionMismatch, "model schema version " + std::to_string(version) +
                                                      ", this build reads " + std::to_string(kModelSchemaVersion));
  }
  return doc;
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TraversalMode parse_mode(const std::string& s) {
  if (s == "path") return TraversalMode::path;
  if (s == "walk") return TraversalMode::walk;
  throw Error(ErrorKind::CorruptModel, "unknown traversal mode '" + s + "'");
}

}  // namespace

std::string model_to_json(const GcknModel& model, const LinearClassifier* classifier) {
  json doc;
  doc["format"] = "gckn-model";
  doc["version"] = kModelSchemaVersion;
  const auto& enc = model.encoding;
  doc["encoding"] = {{"mode", enc.mode == AttributeEncoding::Mode::one_hot ? "one_hot" : "continuous"},
                     {"vocabulary", enc.vocabulary},
                     {"mean", pack_vector(enc.mean)},
                     {"stddev", pack_vector(enc.stddev)}};
  doc["output"] = {{"layers", model.output.layers}, {"global_pooling", to_string(model.output.global_pooling)}};
  json layers = json::array();
  for (const auto& l : model.layers) {
    layers.push_back({{"k", l.k},
                      {"q_in", l.q_in},
                      {"q_out", l.q_out},
                      {"alpha", pack_vector(std::span<const double>(&l.alpha, 1))},
                      {"epsilon", pack_vector(std::span<const double>(&l.epsilon, 1))},
                      {"flavor", to_string(l.flavor)},
                      {"pooling", to_string(l.pooling)},
                      {"mode", l.mode == TraversalMode::path ? "path" : "walk"},
                      {"filters", pack_matrix(l.filters)}});
  }
  doc["layers"] = layers;
  if (model.embed_stats) {
    doc["embed_stats"] = {{"mean", pack_vector({model.embed_stats->mean.data(), static_cast<std::size_t>(model.embed_stats->mean.size())})},
                          {"stddev", pack_vector({model.embed_stats->stddev.data(), static_cast<std::size_t>(model.embed_stats->stddev.size())})}};
  }
  if (classifier) {
    doc["classifier"] = {{"n_classes", classifier->n_classes},
                         {"lambda", pack_vector(std::span<const double>(&classifier->lambda, 1))},
                         {"weights", pack_matrix(classifier->weights)},
                         {"intercepts", pack_vector({classifier->intercepts.data(), static_cast<std::size_t>(classifier->intercepts.size())})}};
  }
  return doc.dump(1);
}

GcknModel model_from_json(const std::string& text) {
  const json doc = parse_document(text);
  GcknModel model;
  try {
    const auto& enc = doc.at("encoding");
    const auto mode = enc.at("mode").get<std::string>();
    if (mode != "one_hot" && mode != "continuous") throw Error(ErrorKind::CorruptModel, "unknown encoding mode");
    model.encoding.mode = mode == "one_hot" ? AttributeEncoding::Mode::one_hot : AttributeEncoding::Mode::continuous;
    model.encoding.vocabulary = enc.at("vocabulary").get<std::vector<std::int64_t>>();
    model.encoding.mean = decode_doubles(enc.at("mean").get<std::string>());
    model.encoding.stddev = decode_doubles(enc.at("stddev").get<std::string>());
    model.output.layers = doc.at("output").at("layers").get<std::vector<int>>();
    model.output.global_pooling = parse_pooling(doc.at("output").at("global_pooling").get<std::string>());
    for (const auto& l : doc.at("layers")) {
      LayerParams p;
      p.k = l.at("k").get<int>();
      p.q_in = l.at("q_in").get<int>();
      p.q_out = l.at("q_out").get<int>();
      const Vector alpha = unpack_vector(l.at("alpha"));
      const Vector eps = unpack_vector(l.at("epsilon"));
      if (alpha.size() != 1 || eps.size() != 1) throw Error(ErrorKind::CorruptModel, "bad scalar payload");
      p.alpha = alpha[0];
      p.epsilon = eps[0];
      p.flavor = parse_flavor(l.at("flavor").get<std::string>());
      p.pooling = parse_pooling(l.at("pooling").get<std::string>());
      p.mode = parse_mode(l.at("mode").get<std::string>());
      p.filters = unpack_matrix(l.at("filters"));
      model.layers.push_back(std::move(p));
    }
    if (doc.contains("embed_stats")) {
      model.embed_stats = EmbedStats{unpack_vector(doc["embed_stats"].at("mean")),
                                     unpack_vector(doc["embed_stats"].at("stddev"))};
    }
    model.validate();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptModel, std::string("malformed model document: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CorruptModel) throw;
    throw Error(ErrorKind::CorruptModel, e.what());
  }
  return model;
}

std::optional<LinearClassifier> classifier_from_json(const std::string& text) {
  const json doc = parse_document(text);
  if (!doc.contains("classifier")) return std::nullopt;
  try {
    const auto& c = doc["classifier"];
    LinearClassifier clf;
    clf.n_classes = c.at("n_classes").get<int>();
    const Vector lambda = unpack_vector(c.at("lambda"));
    if (lambda.size() != 1) throw Error(ErrorKind::CorruptModel, "bad lambda payload");
    clf.lambda = lambda[0];
    clf.weights = unpack_matrix(c.at("weights"));
    clf.intercepts = unpack_vector(c.at("intercepts"));
    if (clf.intercepts.size() != clf.weights.rows()) throw Error(ErrorKind::CorruptModel, "intercept count mismatch");
    return clf;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptModel, std::string("malformed classifier: ") + e.what());
  }
}

void save_model(const GcknModel& model, const std::filesystem::path& file, const LinearClassifier* classifier) {
  const std::string text = model_to_json(model, classifier);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + file.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + file.string());
}

GcknModel load_model(const std::filesystem::path& file) { return model_from_json(read_file(file)); }

std::optional<LinearClassifier> load_classifier(const std::filesystem::path& file) {
  return classifier_from_json(read_file(file));
}

}  // namespace gckn
