#include "kinship/similarity.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "kinship/error.hpp"
#include "kinship/rng.hpp"

namespace kinship {

namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;

}  // namespace

const char* to_string(CombinationKind kind) {
  return kind == CombinationKind::comb1 ? "comb1" : "comb2";
}

CombinationKind combination_from_string(const std::string& name) {
  if (name == "comb1") return CombinationKind::comb1;
  if (name == "comb2") return CombinationKind::comb2;
  throw Error("unknown combination kind '" + name + "'");
}

std::size_t combined_dim(CombinationKind kind, std::size_t dim) {
  return kind == CombinationKind::comb1 ? 2 * dim : 3 * dim;
}

std::vector<double> combine(CombinationKind kind, const std::vector<double>& x,
                            const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw Error("combine: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                std::to_string(y.size()) + ")");
  }
  const std::size_t dim = x.size();
  std::vector<double> out;
  out.reserve(combined_dim(kind, dim));
  for (std::size_t i = 0; i < dim; ++i) out.push_back(x[i] * x[i] - y[i] * y[i]);
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = x[i] - y[i];
    out.push_back(d * d);
  }
  if (kind == CombinationKind::comb2) {
    for (std::size_t i = 0; i < dim; ++i) out.push_back(x[i] * y[i]);
  }
  return out;
}

const char* to_string(Activation activation) {
  return activation == Activation::relu ? "relu" : "sigmoid";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw Error("unknown activation '" + name + "'");
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

SimilarityHead SimilarityHead::from_layers(std::vector<Layer> layers) {
  if (layers.empty()) throw Error("similarity head needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    if (layer.in_dim == 0 || layer.out_dim == 0) {
      throw Error("layer " + std::to_string(i) + " has a zero dimension");
    }
    if (layer.weights.size() != layer.in_dim * layer.out_dim) {
      throw Error("layer " + std::to_string(i) + " weight count does not match out_dim x in_dim");
    }
    if (layer.bias.size() != layer.out_dim) {
      throw Error("layer " + std::to_string(i) + " bias count does not match out_dim");
    }
    if (i > 0 && layers[i - 1].out_dim != layer.in_dim) {
      throw Error("layer " + std::to_string(i) + " input dim " + std::to_string(layer.in_dim) +
                  " does not chain from previous output dim " +
                  std::to_string(layers[i - 1].out_dim));
    }
  }
  const Layer& last = layers.back();
  if (last.out_dim != 1 || last.activation != Activation::sigmoid) {
    throw Error("final layer must be a single sigmoid output");
  }
  return SimilarityHead(std::move(layers));
}

SimilarityHead SimilarityHead::init_random(std::size_t input_dim,
                                           const std::vector<std::size_t>& hidden, Rng& rng) {
  std::vector<Layer> layers;
  std::size_t in_dim = input_dim;
  for (std::size_t h = 0; h <= hidden.size(); ++h) {
    const bool final_layer = h == hidden.size();
    Layer layer;
    layer.in_dim = in_dim;
    layer.out_dim = final_layer ? 1 : hidden[h];
    layer.activation = final_layer ? Activation::sigmoid : Activation::relu;
    const double a = std::sqrt(6.0 / static_cast<double>(layer.in_dim + layer.out_dim));
    layer.weights.resize(layer.in_dim * layer.out_dim);
    for (double& w : layer.weights) w = rng.uniform(-a, a);
    layer.bias.assign(layer.out_dim, 0.0);
    in_dim = layer.out_dim;
    layers.push_back(std::move(layer));
  }
  return from_layers(std::move(layers));
}

std::size_t SimilarityHead::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_) count += layer.weights.size() + layer.bias.size();
  return count;
}

double SimilarityHead::forward(const std::vector<double>& input) const {
  return forward_trace(input).output;
}

SimilarityHead::Trace SimilarityHead::forward_trace(const std::vector<double>& input) const {
  if (input.size() != input_dim()) {
    throw Error("head forward: input dim " + std::to_string(input.size()) + ", expected " +
                std::to_string(input_dim()));
  }
  Trace trace;
  trace.activations.push_back(input);
  for (const auto& layer : layers_) {
    const std::vector<double>& in = trace.activations.back();
    std::vector<double> pre(layer.out_dim);
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
      double z = layer.bias[r];
      const double* row = layer.weights.data() + r * layer.in_dim;
      for (std::size_t c = 0; c < layer.in_dim; ++c) z += row[c] * in[c];
      pre[r] = z;
    }
    std::vector<double> act(layer.out_dim);
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
      act[r] = layer.activation == Activation::relu ? (pre[r] > 0.0 ? pre[r] : 0.0)
                                                    : sigmoid(pre[r]);
    }
    trace.pre.push_back(std::move(pre));
    trace.activations.push_back(std::move(act));
  }
  trace.output = trace.activations.back()[0];
  return trace;
}

void save_checkpoint(const SimilarityHead& head, CombinationKind kind,
                     const std::filesystem::path& path) {
  json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["combination"] = to_string(kind);
  doc["input_dim"] = head.input_dim();
  doc["layers"] = json::array();
  for (const auto& layer : head.layers()) {
    json jlayer;
    jlayer["in"] = layer.in_dim;
    jlayer["out"] = layer.out_dim;
    jlayer["activation"] = to_string(layer.activation);
    jlayer["weights"] = layer.weights;
    jlayer["bias"] = layer.bias;
    doc["layers"].push_back(std::move(jlayer));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw Error("failed writing checkpoint to '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");

  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error("malformed checkpoint '" + path.string() + "': " + e.what());
  }

  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw Error("unsupported checkpoint version " + std::to_string(version) + " in '" +
                  path.string() + "'");
    }
    const CombinationKind kind = combination_from_string(doc.at("combination").get<std::string>());
    std::vector<Layer> layers;
    for (const auto& jlayer : doc.at("layers")) {
      Layer layer;
      layer.in_dim = jlayer.at("in").get<std::size_t>();
      layer.out_dim = jlayer.at("out").get<std::size_t>();
      layer.activation = activation_from_string(jlayer.at("activation").get<std::string>());
      layer.weights = jlayer.at("weights").get<std::vector<double>>();
      layer.bias = jlayer.at("bias").get<std::vector<double>>();
      layers.push_back(std::move(layer));
    }
    auto head = SimilarityHead::from_layers(std::move(layers));
    if (head.input_dim() != doc.at("input_dim").get<std::size_t>()) {
      throw Error("checkpoint '" + path.string() + "' input_dim does not match first layer");
    }
    return Checkpoint{std::move(head), kind};
  } catch (const json::exception& e) {
    throw Error("malformed checkpoint '" + path.string() + "': " + e.what());
  }
}

double cosine_similarity(const std::vector<double>& f1, const std::vector<double>& f2) {
  if (f1.size() != f2.size()) {
    throw Error("cosine similarity: dimension mismatch (" + std::to_string(f1.size()) + " vs " +
                std::to_string(f2.size()) + ")");
  }
  double dot = 0.0;
  double norm1 = 0.0;
  double norm2 = 0.0;
  for (std::size_t i = 0; i < f1.size(); ++i) {
    dot += f1[i] * f2[i];
    norm1 += f1[i] * f1[i];
    norm2 += f2[i] * f2[i];
  }
  if (norm1 == 0.0 || norm2 == 0.0) {
    throw Error("cosine similarity undefined for a zero-norm vector");
  }
  return dot / (std::sqrt(norm1) * std::sqrt(norm2));
}

}  // namespace kinship
