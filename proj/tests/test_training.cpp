#include "kinship/training.hpp"

#include <cmath>

#include <doctest.h>

#include "kinship/error.hpp"
#include "kinship/rng.hpp"
#include "kinship/synth.hpp"

using namespace kinship;

namespace {

/// Worst relative error between analytic and central-difference gradients,
/// with a unit floor in the denominator so near-zero components are compared
/// absolutely.
double max_gradient_error(const SimilarityHead& head, const std::vector<double>& input, int label,
                          LossKind kind, double gamma) {
  const auto result = backward(head, input, label, kind, gamma);
  const auto analytic = flatten_gradients(result.gradients);

  const auto loss_at = [&](const std::vector<double>& params) {
    const auto probed = head_with_parameters(head, params);
    return pair_loss(probed.forward(input), label, kind, gamma);
  };
  const auto numeric = numerical_gradient(loss_at, flatten_parameters(head));

  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("bce loss matches hand-derived values") {
  CHECK(bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(0.9, 1) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
  CHECK(bce_loss(0.9, 0) == doctest::Approx(-std::log(0.1)).epsilon(1e-9));

  // symmetry bce(s,1) == bce(1-s,0)
  for (double s = 0.05; s < 1.0; s += 0.05) {
    CHECK(bce_loss(s, 1) == doctest::Approx(bce_loss(1.0 - s, 0)).epsilon(1e-12));
  }

  // clamping keeps saturated inputs finite
  CHECK(std::isfinite(bce_loss(0.0, 1)));
  CHECK(std::isfinite(bce_loss(1.0, 0)));
  CHECK_THROWS_AS(bce_loss(0.5, 2), Error);
}

TEST_CASE("focal loss matches hand-derived values and reduces to bce at gamma 0") {
  CHECK(focal_loss(0.5, 1, 2.0) == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
  CHECK(focal_loss(0.9, 0, 2.0) == doctest::Approx(0.81 * -std::log(0.1)).epsilon(1e-9));

  for (int i = 1; i <= 99; ++i) {
    const double s = i / 100.0;
    for (int label : {0, 1}) {
      CHECK(focal_loss(s, label, 0.0) == doctest::Approx(bce_loss(s, label)).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(focal_loss(0.5, 1, -1.0), Error);
}

TEST_CASE("losses are nonnegative and decrease toward the correct answer") {
  double previous_bce = bce_loss(0.01, 1);
  double previous_focal = focal_loss(0.01, 1, 2.0);
  for (double s = 0.02; s < 1.0; s += 0.01) {
    const double b = bce_loss(s, 1);
    const double f = focal_loss(s, 1, 2.0);
    CHECK(b >= 0.0);
    CHECK(f >= 0.0);
    CHECK(b < previous_bce);
    CHECK(f < previous_focal);
    previous_bce = b;
    previous_focal = f;
  }
}

TEST_CASE("numerical gradient oracle sanity") {
  SUBCASE("quadratic: d/dp p^2 at 3 is 6") {
    const auto grad = numerical_gradient(
        [](const std::vector<double>& p) { return p[0] * p[0]; }, {3.0});
    CHECK(grad[0] == doctest::Approx(6.0).epsilon(1e-9));
  }
  SUBCASE("constant function has zero gradient") {
    const auto grad = numerical_gradient([](const std::vector<double>&) { return 7.5; },
                                         {1.0, -2.0, 0.0});
    for (double g : grad) CHECK(g == 0.0);
  }
  SUBCASE("linear function is exact") {
    const auto grad = numerical_gradient(
        [](const std::vector<double>& p) { return 2.0 * p[0]; }, {11.0});
    CHECK(grad[0] == doctest::Approx(2.0).epsilon(1e-10));
  }
}

TEST_CASE("analytic gradients match the central-difference oracle") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    Rng rng(seed);
    for (LossKind kind : {LossKind::bce, LossKind::focal}) {
      for (CombinationKind comb : {CombinationKind::comb1, CombinationKind::comb2}) {
        std::vector<double> f1(4), f2(4);
        for (auto& v : f1) v = rng.uniform(-1.5, 1.5);
        for (auto& v : f2) v = rng.uniform(-1.5, 1.5);
        const auto input = combine(comb, f1, f2);
        const auto head = SimilarityHead::init_random(input.size(), {10, 5}, rng);
        const int label = static_cast<int>(rng.below(2));
        const double gamma = kind == LossKind::focal ? 2.0 : 0.0;
        CHECK(max_gradient_error(head, input, label, kind, gamma) <= 1e-6);
      }
    }
  }
}

TEST_CASE("gradients are exact through a sigmoid hidden layer too") {
  Rng rng(13);
  std::vector<Layer> layers;
  layers.push_back(Layer{5, 4, {}, {}, Activation::sigmoid});
  layers.push_back(Layer{4, 1, {}, {}, Activation::sigmoid});
  for (auto& layer : layers) {
    layer.weights.resize(layer.in_dim * layer.out_dim);
    for (auto& w : layer.weights) w = rng.uniform(-0.8, 0.8);
    layer.bias.resize(layer.out_dim);
    for (auto& b : layer.bias) b = rng.uniform(-0.2, 0.2);
  }
  const auto head = SimilarityHead::from_layers(std::move(layers));
  std::vector<double> input(5);
  for (auto& v : input) v = rng.uniform(-1.0, 1.0);

  CHECK(max_gradient_error(head, input, 1, LossKind::focal, 2.0) <= 1e-6);
  CHECK(max_gradient_error(head, input, 0, LossKind::bce, 0.0) <= 1e-6);
}

TEST_CASE("doubling the loss doubles every gradient component") {
  Rng rng(21);
  const auto head = SimilarityHead::init_random(6, {4}, rng);
  std::vector<double> input(6);
  for (auto& v : input) v = rng.uniform(-1.0, 1.0);

  const auto once = backward(head, input, 1, LossKind::bce, 0.0);
  auto doubled = once.gradients;
  doubled.add(once.gradients);

  const auto flat_once = flatten_gradients(once.gradients);
  const auto flat_doubled = flatten_gradients(doubled);
  for (std::size_t i = 0; i < flat_once.size(); ++i) {
    CHECK(flat_doubled[i] == doctest::Approx(2.0 * flat_once[i]).epsilon(1e-12));
  }
}

TEST_CASE("gradients shrink as the prediction approaches the label") {
  // Single-layer head with one input: logit = w * x + b; drive w so the
  // sigmoid saturates toward the correct label and watch |dL/dw| fall.
  double previous = 1e300;
  for (double w : {0.0, 1.0, 2.0, 4.0, 8.0}) {
    Layer layer{1, 1, {w}, {0.0}, Activation::sigmoid};
    const auto head = SimilarityHead::from_layers({layer});
    const auto result = backward(head, {1.0}, 1, LossKind::bce, 0.0);
    const double magnitude = std::abs(result.gradients.weights[0][0]);
    CHECK(magnitude < previous);
    previous = magnitude;
  }
}

TEST_CASE("sgd step applies p -= lr * g") {
  Layer layer{1, 1, {1.0}, {0.5}, Activation::sigmoid};
  auto head = SimilarityHead::from_layers({layer});

  HeadGradients grads = zero_gradients(head);
  grads.weights[0][0] = 0.5;
  sgd_step(head, grads, 0.01);
  CHECK(head.layers()[0].weights[0] == doctest::Approx(0.995).epsilon(1e-15));
  CHECK(head.layers()[0].bias[0] == 0.5);

  // zero gradient and zero lr leave parameters unchanged
  sgd_step(head, zero_gradients(head), 0.01);
  CHECK(head.layers()[0].weights[0] == doctest::Approx(0.995).epsilon(1e-15));
  grads.weights[0][0] = 123.0;
  sgd_step(head, grads, 0.0);
  CHECK(head.layers()[0].weights[0] == doctest::Approx(0.995).epsilon(1e-15));

  HeadGradients wrong;
  CHECK_THROWS_AS(sgd_step(head, wrong, 0.1), Error);
}

TEST_CASE("training separates high-separation synthetic pairs") {
  SynthParams params;
  params.n_families = 12;
  params.identities_per_family = 2;
  params.images_per_identity = 3;
  params.dim = 16;
  params.family_spread = 10.0;
  params.identity_spread = 1.0;
  params.image_noise = 1.0;
  params.seed = 31;
  const auto data = generate(params);

  const auto train_pairs = sample_pairs(data.manifest, 150, 150, 1).pairs;
  const auto held_out = sample_pairs(data.manifest, 80, 80, 2).pairs;

  TrainConfig config;  // default head 100 -> 25, bce, lr 1e-2
  config.epochs = 40;
  config.batch_size = 64;
  config.seed = 7;

  const auto result = train(data.store, train_pairs, CombinationKind::comb1, config);
  REQUIRE(result.report.epoch_mean_loss.size() == 40);
  CHECK(result.report.epoch_mean_loss.back() < 0.1);
  CHECK(pair_accuracy(result.head, data.store, held_out, CombinationKind::comb1) >= 0.9);

  // loss history is finite and reproducible bit for bit
  for (double loss : result.report.epoch_mean_loss) CHECK(std::isfinite(loss));
  const auto rerun = train(data.store, train_pairs, CombinationKind::comb1, config);
  CHECK(rerun.report.epoch_mean_loss == result.report.epoch_mean_loss);
}

TEST_CASE("shuffled labels leave the loss near ln 2") {
  SynthParams params;
  params.n_families = 12;
  params.identities_per_family = 2;
  params.images_per_identity = 3;
  params.dim = 16;
  params.seed = 31;
  const auto data = generate(params);

  auto pairs = sample_pairs(data.manifest, 150, 150, 1).pairs;
  // Reassign labels at random: half 1, half 0, independent of kinship.
  Rng rng(99);
  std::vector<int> labels(pairs.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2;
  rng.shuffle(labels);
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].label = labels[i];

  TrainConfig config;
  config.epochs = 40;
  config.seed = 7;
  config.hidden_dims = {32, 8};

  const auto result = train(data.store, pairs, CombinationKind::comb1, config);
  CHECK(result.report.epoch_mean_loss.back() == doctest::Approx(std::log(2.0)).epsilon(0.25));
}

TEST_CASE("train validates its inputs") {
  SynthParams params;
  params.dim = 4;
  const auto data = generate(params);
  TrainConfig config;

  CHECK_THROWS_WITH_AS(train(data.store, {}, CombinationKind::comb1, config),
                       doctest::Contains("empty pair list"), Error);

  std::vector<LabeledPair> pairs{{"missing_a", "missing_b", 1}};
  CHECK_THROWS_WITH_AS(train(data.store, pairs, CombinationKind::comb1, config),
                       doctest::Contains("missing embedding id"), Error);
}
