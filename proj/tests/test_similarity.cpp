#include "kinship/similarity.hpp"

#include <cmath>

#include <doctest.h>

#include "kinship/error.hpp"
#include "kinship/rng.hpp"
#include "test_util.hpp"

using namespace kinship;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

}  // namespace

TEST_CASE("combinations match hand arithmetic") {
  const std::vector<double> x{2.0, 1.0};
  const std::vector<double> y{1.0, 1.0};

  CHECK(combine(CombinationKind::comb1, x, y) == std::vector<double>{3, 0, 1, 0});
  CHECK(combine(CombinationKind::comb2, x, y) == std::vector<double>{3, 0, 1, 0, 2, 1});

  // x == y zeroes both comb1 blocks
  CHECK(combine(CombinationKind::comb1, x, x) == std::vector<double>{0, 0, 0, 0});

  CHECK(combined_dim(CombinationKind::comb1, 5) == 10);
  CHECK(combined_dim(CombinationKind::comb2, 5) == 15);

  CHECK_THROWS_WITH_AS(combine(CombinationKind::comb1, x, {1.0}),
                       doctest::Contains("dimension mismatch"), Error);
}

TEST_CASE("swap rule: first block negates, the rest are symmetric") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 1 + rng.below(8);
    const auto x = random_vector(rng, dim);
    const auto y = random_vector(rng, dim);

    const auto xy = combine(CombinationKind::comb2, x, y);
    const auto yx = combine(CombinationKind::comb2, y, x);
    for (std::size_t i = 0; i < dim; ++i) {
      CHECK(xy[i] == doctest::Approx(-yx[i]).epsilon(1e-12));
      CHECK(xy[dim + i] == yx[dim + i]);
      CHECK(xy[2 * dim + i] == yx[2 * dim + i]);
    }
  }
}

TEST_CASE("head validation") {
  Layer bad_final{2, 1, {1.0, -1.0}, {0.0}, Activation::relu};
  CHECK_THROWS_WITH_AS(SimilarityHead::from_layers({bad_final}),
                       doctest::Contains("single sigmoid output"), Error);

  Layer l1{4, 3, std::vector<double>(12, 0.1), std::vector<double>(3, 0.0), Activation::relu};
  Layer mismatched{2, 1, {1.0, 1.0}, {0.0}, Activation::sigmoid};
  CHECK_THROWS_WITH_AS(SimilarityHead::from_layers({l1, mismatched}),
                       doctest::Contains("does not chain"), Error);
}

TEST_CASE("fc forward matches hand-evaluated logistic values") {
  SUBCASE("zero head gives sigmoid(0) = 0.5") {
    Layer layer{3, 1, {0.0, 0.0, 0.0}, {0.0}, Activation::sigmoid};
    const auto head = SimilarityHead::from_layers({layer});
    CHECK(head.forward({5.0, -2.0, 100.0}) == 0.5);
  }
  SUBCASE("single layer w=[1,-1], b=0, input [2,1]") {
    Layer layer{2, 1, {1.0, -1.0}, {0.0}, Activation::sigmoid};
    const auto head = SimilarityHead::from_layers({layer});
    CHECK(head.forward({2.0, 1.0}) == doctest::Approx(0.731059).epsilon(1e-6));
  }
  SUBCASE("dimension mismatch") {
    Layer layer{2, 1, {1.0, -1.0}, {0.0}, Activation::sigmoid};
    const auto head = SimilarityHead::from_layers({layer});
    CHECK_THROWS_AS(head.forward({1.0, 2.0, 3.0}), Error);
  }
}

TEST_CASE("fc forward stays strictly inside (0,1) on random heads") {
  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const auto head = SimilarityHead::init_random(6, {8, 4}, rng);
    const auto input = random_vector(rng, 6);
    const double sim = head.forward(input);
    CHECK(sim > 0.0);
    CHECK(sim < 1.0);
    CHECK(std::isfinite(sim));
    // deterministic
    CHECK(head.forward(input) == sim);
  }
}

TEST_CASE("checkpoint round-trips the head and combination") {
  test::TempDir dir;
  Rng rng(17);
  const auto head = SimilarityHead::init_random(8, {5, 3}, rng);
  const auto path = dir.file("head.json");
  save_checkpoint(head, CombinationKind::comb2, path);

  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.combination == CombinationKind::comb2);
  CHECK(loaded.head.input_dim() == 8);
  REQUIRE(loaded.head.layers().size() == 3);

  const auto input = random_vector(rng, 8);
  CHECK(loaded.head.forward(input) == head.forward(input));
}

TEST_CASE("cosine similarity matches hand values and rejects bad input") {
  CHECK(cosine_similarity({1, 0, 0}, {1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity({1, 0}, {0, 1}) == 0.0);
  CHECK(cosine_similarity({1, 1}, {1, 0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(cosine_similarity({0, 0}, {1, 0}), doctest::Contains("zero-norm"), Error);
  CHECK_THROWS_AS(cosine_similarity({1, 0}, {1, 0, 0}), Error);
}

TEST_CASE("cosine similarity symmetry, scale rule and bound") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 2 + rng.below(6);
    auto x = random_vector(rng, dim);
    auto y = random_vector(rng, dim);
    x[0] += 0.5;  // keep away from the zero vector
    y[0] -= 0.5;

    const double sim = cosine_similarity(x, y);
    CHECK(cosine_similarity(y, x) == sim);
    CHECK(std::abs(sim) <= 1.0 + 1e-15);

    const double a = rng.uniform(0.1, 5.0);
    const double b = -rng.uniform(0.1, 5.0);
    std::vector<double> ax(dim), by(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      ax[i] = a * x[i];
      by[i] = b * y[i];
    }
    CHECK(cosine_similarity(ax, by) == doctest::Approx(-sim).epsilon(1e-12));
  }
}
