#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "kinship/embedding.hpp"
#include "kinship/pairing.hpp"
#include "kinship/similarity.hpp"

namespace kinship {

enum class LossKind { bce, focal };

const char* to_string(LossKind kind);
LossKind loss_from_string(const std::string& name);

/// Probabilities are clamped to [kProbabilityClamp, 1 - kProbabilityClamp]
/// before any logarithm, so saturated sigmoids cannot produce infinite loss.
constexpr double kProbabilityClamp = 1e-7;

/// -label ln(sim) - (1 - label) ln(1 - sim), after clamping.
double bce_loss(double sim, int label);

/// label=1 -> -(1 - sim)^gamma ln(sim); label=0 -> -sim^gamma ln(1 - sim).
/// gamma = 0 reduces to bce_loss pointwise.
double focal_loss(double sim, int label, double gamma);

double pair_loss(double sim, int label, LossKind kind, double gamma);

/// Per-layer gradient arrays, shapes mirroring the head.
struct HeadGradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  void add(const HeadGradients& other);
  void scale(double factor);
};

HeadGradients zero_gradients(const SimilarityHead& head);

struct BackwardResult {
  double sim = 0.0;
  double loss = 0.0;
  HeadGradients gradients;
};

/// Loss and its gradient with respect to every head parameter for one
/// combined input, by backpropagation through the affine/activation chain
/// and the chosen loss.
BackwardResult backward(const SimilarityHead& head, const std::vector<double>& combined_input,
                        int label, LossKind loss_kind, double gamma);

/// Central-difference gradient oracle: (f(p + eps) - f(p - eps)) / (2 eps)
/// per parameter. Independent of the backpropagation path.
std::vector<double> numerical_gradient(
    const std::function<double(const std::vector<double>&)>& loss_at, std::vector<double> params,
    double epsilon = 1e-5);

/// Head parameters flattened layer by layer, weights then bias.
std::vector<double> flatten_parameters(const SimilarityHead& head);

/// Head with the same shape as `like` and parameters taken from `flat`.
SimilarityHead head_with_parameters(const SimilarityHead& like, const std::vector<double>& flat);

std::vector<double> flatten_gradients(const HeadGradients& grads);

/// p <- p - lr * g, element-wise. Throws Error on shape mismatch.
void sgd_step(SimilarityHead& head, const HeadGradients& gradients, double learning_rate);

struct TrainConfig {
  LossKind loss_kind = LossKind::bce;
  double gamma = 2.0;           // used only by focal loss
  double learning_rate = 1e-2;
  int epochs = 120;
  int batch_size = 64;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden_dims = {100, 25};
};

struct TrainReport {
  std::vector<double> epoch_mean_loss;
  CombinationKind combination = CombinationKind::comb1;
  TrainConfig config;
  std::size_t pair_count = 0;
  double elapsed_seconds = 0.0;  // informational; not part of any output file
};

struct TrainResult {
  SimilarityHead head;
  TrainReport report;
};

/// Mini-batch SGD over shuffled pairs for config.epochs epochs. Weight init,
/// shuffling and accumulation order are all fixed by config.seed, so a rerun
/// reproduces the loss history bit for bit. Throws Error on an empty pair
/// list or a pair image missing from the store.
TrainResult train(const EmbeddingStore& store, const std::vector<LabeledPair>& pairs,
                  CombinationKind combination, const TrainConfig& config);

/// Fraction of pairs whose FC score, thresholded at 0.5, matches the label.
double pair_accuracy(const SimilarityHead& head, const EmbeddingStore& store,
                     const std::vector<LabeledPair>& pairs, CombinationKind combination);

}  // namespace kinship
