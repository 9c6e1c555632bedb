#include "kinship/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "kinship/error.hpp"
#include "kinship/rng.hpp"

namespace kinship {

namespace {

double clamp_probability(double sim) {
  return std::min(std::max(sim, kProbabilityClamp), 1.0 - kProbabilityClamp);
}

void check_label(int label) {
  if (label != 0 && label != 1) {
    throw Error("label must be 0 or 1, got " + std::to_string(label));
  }
}

/// dLoss / d(final-layer logit), with the sigmoid folded in analytically:
/// bce gives sim - label, focal its gamma-modulated analogue. The folded
/// form stays bounded (|.| <= 1 + gamma/e) where the chain through a
/// saturated sigmoid would underflow to zero and freeze training; the
/// clamp only guards the logarithms.
double loss_logit_derivative(double sim, double sim_clamped, int label, LossKind kind,
                             double gamma) {
  if (kind == LossKind::bce) {
    return sim - static_cast<double>(label);
  }
  if (label == 1) {
    const double q = 1.0 - sim;
    return gamma * sim * std::pow(q, gamma) * std::log(sim_clamped) - std::pow(q, gamma) * q;
  }
  return -gamma * std::pow(sim, gamma) * (1.0 - sim) * std::log(1.0 - sim_clamped) +
         std::pow(sim, gamma) * sim;
}

}  // namespace

const char* to_string(LossKind kind) { return kind == LossKind::bce ? "bce" : "focal"; }

LossKind loss_from_string(const std::string& name) {
  if (name == "bce") return LossKind::bce;
  if (name == "focal") return LossKind::focal;
  throw Error("unknown loss kind '" + name + "'");
}

double bce_loss(double sim, int label) {
  check_label(label);
  const double s = clamp_probability(sim);
  const double l = static_cast<double>(label);
  return -(l * std::log(s) + (1.0 - l) * std::log(1.0 - s));
}

double focal_loss(double sim, int label, double gamma) {
  check_label(label);
  if (gamma < 0.0) throw Error("focal loss gamma must be >= 0");
  const double s = clamp_probability(sim);
  if (label == 1) return -std::pow(1.0 - s, gamma) * std::log(s);
  return -std::pow(s, gamma) * std::log(1.0 - s);
}

double pair_loss(double sim, int label, LossKind kind, double gamma) {
  return kind == LossKind::bce ? bce_loss(sim, label) : focal_loss(sim, label, gamma);
}

void HeadGradients::add(const HeadGradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += other.weights[l][i];
    for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += other.bias[l][i];
  }
}

void HeadGradients::scale(double factor) {
  for (auto& layer : weights) {
    for (double& g : layer) g *= factor;
  }
  for (auto& layer : bias) {
    for (double& g : layer) g *= factor;
  }
}

HeadGradients zero_gradients(const SimilarityHead& head) {
  HeadGradients grads;
  for (const auto& layer : head.layers()) {
    grads.weights.emplace_back(layer.weights.size(), 0.0);
    grads.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return grads;
}

BackwardResult backward(const SimilarityHead& head, const std::vector<double>& combined_input,
                        int label, LossKind loss_kind, double gamma) {
  check_label(label);
  const auto trace = head.forward_trace(combined_input);
  const double sim = trace.output;
  const double sim_clamped = clamp_probability(sim);

  BackwardResult result;
  result.sim = sim;
  result.loss = pair_loss(sim, label, loss_kind, gamma);
  result.gradients = zero_gradients(head);

  const auto& layers = head.layers();
  // delta = dLoss / d(pre-activation) of the current layer.
  std::vector<double> delta(1, loss_logit_derivative(sim, sim_clamped, label, loss_kind, gamma));

  for (std::size_t l = layers.size(); l-- > 0;) {
    const Layer& layer = layers[l];
    const std::vector<double>& input = trace.activations[l];
    auto& dw = result.gradients.weights[l];
    auto& db = result.gradients.bias[l];
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
      db[r] = delta[r];
      double* row = dw.data() + r * layer.in_dim;
      for (std::size_t c = 0; c < layer.in_dim; ++c) row[c] = delta[r] * input[c];
    }
    if (l == 0) break;

    std::vector<double> prev(layer.in_dim, 0.0);
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
      const double* row = layer.weights.data() + r * layer.in_dim;
      for (std::size_t c = 0; c < layer.in_dim; ++c) prev[c] += delta[r] * row[c];
    }
    const Layer& below = layers[l - 1];
    for (std::size_t c = 0; c < below.out_dim; ++c) {
      if (below.activation == Activation::relu) {
        prev[c] = trace.pre[l - 1][c] > 0.0 ? prev[c] : 0.0;
      } else {
        const double a = trace.activations[l][c];
        prev[c] *= a * (1.0 - a);
      }
    }
    delta = std::move(prev);
  }
  return result;
}

std::vector<double> numerical_gradient(
    const std::function<double(const std::vector<double>&)>& loss_at, std::vector<double> params,
    double epsilon) {
  if (epsilon <= 0.0) throw Error("numerical gradient epsilon must be positive");
  std::vector<double> grads(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = loss_at(params);
    params[i] = saved - epsilon;
    const double down = loss_at(params);
    params[i] = saved;
    grads[i] = (up - down) / (2.0 * epsilon);
  }
  return grads;
}

std::vector<double> flatten_parameters(const SimilarityHead& head) {
  std::vector<double> flat;
  flat.reserve(head.parameter_count());
  for (const auto& layer : head.layers()) {
    flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

SimilarityHead head_with_parameters(const SimilarityHead& like, const std::vector<double>& flat) {
  if (flat.size() != like.parameter_count()) {
    throw Error("parameter vector size does not match head shape");
  }
  std::vector<Layer> layers = like.layers();
  std::size_t offset = 0;
  for (auto& layer : layers) {
    std::copy_n(flat.begin() + offset, layer.weights.size(), layer.weights.begin());
    offset += layer.weights.size();
    std::copy_n(flat.begin() + offset, layer.bias.size(), layer.bias.begin());
    offset += layer.bias.size();
  }
  return SimilarityHead::from_layers(std::move(layers));
}

std::vector<double> flatten_gradients(const HeadGradients& grads) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    flat.insert(flat.end(), grads.weights[l].begin(), grads.weights[l].end());
    flat.insert(flat.end(), grads.bias[l].begin(), grads.bias[l].end());
  }
  return flat;
}

void sgd_step(SimilarityHead& head, const HeadGradients& gradients, double learning_rate) {
  auto& layers = head.mutable_layers();
  if (gradients.weights.size() != layers.size() || gradients.bias.size() != layers.size()) {
    throw Error("sgd step: gradient layer count does not match head");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (gradients.weights[l].size() != layers[l].weights.size() ||
        gradients.bias[l].size() != layers[l].bias.size()) {
      throw Error("sgd step: gradient shape does not match layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < layers[l].weights.size(); ++i) {
      layers[l].weights[i] -= learning_rate * gradients.weights[l][i];
    }
    for (std::size_t i = 0; i < layers[l].bias.size(); ++i) {
      layers[l].bias[i] -= learning_rate * gradients.bias[l][i];
    }
  }
}

TrainResult train(const EmbeddingStore& store, const std::vector<LabeledPair>& pairs,
                  CombinationKind combination, const TrainConfig& config) {
  if (pairs.empty()) throw Error("cannot train on an empty pair list");
  if (config.learning_rate <= 0.0) throw Error("learning rate must be positive");
  if (config.epochs < 1) throw Error("epochs must be >= 1");
  if (config.batch_size < 1) throw Error("batch size must be >= 1");

  const auto start = std::chrono::steady_clock::now();

  // Combine once per pair; training touches only the combined features.
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
  inputs.reserve(pairs.size());
  labels.reserve(pairs.size());
  for (const auto& pair : pairs) {
    if (!store.contains(pair.image_a)) throw Error("missing embedding id '" + pair.image_a + "'");
    if (!store.contains(pair.image_b)) throw Error("missing embedding id '" + pair.image_b + "'");
    inputs.push_back(combine(combination, widen(store.at(pair.image_a)),
                             widen(store.at(pair.image_b))));
    labels.push_back(pair.label);
  }

  Rng rng(config.seed);
  SimilarityHead head =
      SimilarityHead::init_random(combined_dim(combination, store.dim()), config.hidden_dims, rng);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport report;
  report.combination = combination;
  report.config = config;
  report.pair_count = pairs.size();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      HeadGradients batch_grads = zero_gradients(head);
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = order[k];
        auto result = backward(head, inputs[i], labels[i], config.loss_kind, config.gamma);
        loss_sum += result.loss;
        batch_grads.add(result.gradients);
      }
      batch_grads.scale(1.0 / static_cast<double>(end - begin));
      sgd_step(head, batch_grads, config.learning_rate);
    }
    report.epoch_mean_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }

  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return TrainResult{std::move(head), std::move(report)};
}

double pair_accuracy(const SimilarityHead& head, const EmbeddingStore& store,
                     const std::vector<LabeledPair>& pairs, CombinationKind combination) {
  if (pairs.empty()) throw Error("cannot evaluate accuracy on an empty pair list");
  std::size_t correct = 0;
  for (const auto& pair : pairs) {
    const double sim =
        head.forward(combine(combination, widen(store.at(pair.image_a)),
                             widen(store.at(pair.image_b))));
    const int predicted = sim > 0.5 ? 1 : 0;
    if (predicted == pair.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

}  // namespace kinship
