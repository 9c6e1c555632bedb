#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kinship {

class Rng;

/// Element-wise feature combinations fed to the FC head. With x, y the two
/// embeddings and || concatenation:
///   comb1 -> [x^2 - y^2 || (x - y)^2]            (length 2D)
///   comb2 -> [x^2 - y^2 || (x - y)^2 || x * y]   (length 3D)
/// The first block is antisymmetric under swapping the inputs, the others
/// symmetric.
enum class CombinationKind { comb1, comb2 };

const char* to_string(CombinationKind kind);
CombinationKind combination_from_string(const std::string& name);

/// Output length of a combination for feature dimension dim.
std::size_t combined_dim(CombinationKind kind, std::size_t dim);

/// Throws Error on dimension mismatch.
std::vector<double> combine(CombinationKind kind, const std::vector<double>& x,
                            const std::vector<double>& y);

enum class Activation { relu, sigmoid };

const char* to_string(Activation activation);
Activation activation_from_string(const std::string& name);

double sigmoid(double z);

struct Layer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weights;  // row-major, out_dim x in_dim
  std::vector<double> bias;     // out_dim
  Activation activation = Activation::relu;
};

/// Fully connected similarity head: an affine + activation chain whose final
/// layer has one sigmoid output, so scores land strictly inside (0, 1).
/// Weights are immutable during inference; the forward pass is pure.
class SimilarityHead {
 public:
  /// Validates the chain: consecutive dims match, final layer is a single
  /// sigmoid output.
  static SimilarityHead from_layers(std::vector<Layer> layers);

  /// Head with the given hidden relu widths and a sigmoid output, weights
  /// uniform on (-a, a) with a = sqrt(6 / (fan_in + fan_out)), biases zero.
  static SimilarityHead init_random(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                    Rng& rng);

  std::size_t input_dim() const { return layers_.front().in_dim; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }
  std::size_t parameter_count() const;

  /// Applies the affine + activation chain; result in (0, 1). Throws Error
  /// on input dimension mismatch.
  double forward(const std::vector<double>& input) const;

  /// Forward pass keeping pre-activations and activations per layer for
  /// backpropagation. activations[0] is the input; pre[i]/activations[i+1]
  /// belong to layer i.
  struct Trace {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> activations;
    double output = 0.0;
  };
  Trace forward_trace(const std::vector<double>& input) const;

 private:
  explicit SimilarityHead(std::vector<Layer> layers) : layers_(std::move(layers)) {}

  std::vector<Layer> layers_;
};

/// Checkpoint JSON: format version, combination kind, layer dims, row-major
/// weights, biases and activation names.
void save_checkpoint(const SimilarityHead& head, CombinationKind kind,
                     const std::filesystem::path& path);

struct Checkpoint {
  SimilarityHead head;
  CombinationKind combination;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// dot(f1, f2) / (|f1| |f2|), in [-1, 1]. Throws Error on dimension
/// mismatch or a zero-norm input.
double cosine_similarity(const std::vector<double>& f1, const std::vector<double>& f2);

}  // namespace kinship
