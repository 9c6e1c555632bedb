#include "kinship/embedding.hpp"

#include <cstdint>
#include <fstream>

#include <doctest.h>

#include "kinship/error.hpp"
#include "kinship/rng.hpp"
#include "test_util.hpp"

using namespace kinship;

TEST_CASE("average pool is the per-channel spatial mean") {
  SUBCASE("constant map") {
    FeatureMap map{"img", 3, 2, 2, std::vector<float>(12, 3.0f)};
    const auto vec = average_pool(map);
    REQUIRE(vec.values.size() == 3);
    for (float v : vec.values) CHECK(v == 3.0f);
  }
  SUBCASE("single channel 2x2") {
    FeatureMap map{"img", 1, 2, 2, {1.0f, 2.0f, 3.0f, 4.0f}};
    CHECK(average_pool(map).values[0] == 2.5f);
  }
  SUBCASE("two channels") {
    FeatureMap map{"img", 2, 2, 2, {0, 0, 0, 0, 1, 3, 5, 7}};
    const auto vec = average_pool(map);
    CHECK(vec.values[0] == 0.0f);
    CHECK(vec.values[1] == 4.0f);
  }
}

TEST_CASE("max pool is the per-channel spatial maximum") {
  FeatureMap map{"img", 1, 2, 2, {1.0f, 2.0f, 3.0f, 4.0f}};
  CHECK(max_pool(map).values[0] == 4.0f);

  FeatureMap constant{"img", 2, 3, 1, std::vector<float>(6, 3.0f)};
  for (float v : max_pool(constant).values) CHECK(v == 3.0f);
}

TEST_CASE("pooling properties on random maps") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureMap map;
    map.image_id = "img";
    map.channels = 1 + static_cast<std::uint32_t>(rng.below(4));
    map.height = 1 + static_cast<std::uint32_t>(rng.below(5));
    map.width = 1 + static_cast<std::uint32_t>(rng.below(5));
    map.values.resize(static_cast<std::size_t>(map.channels) * map.height * map.width);
    for (auto& v : map.values) v = static_cast<float>(rng.uniform(-10.0, 10.0));

    const auto avg = average_pool(map);
    const auto mx = max_pool(map);

    // max >= mean per channel
    for (std::size_t c = 0; c < map.channels; ++c) {
      CHECK(mx.values[c] >= avg.values[c] - 1e-6f);
    }

    // permutation invariance within a channel
    FeatureMap shuffled = map;
    const std::size_t plane = static_cast<std::size_t>(map.height) * map.width;
    for (std::size_t c = 0; c < map.channels; ++c) {
      std::vector<float> channel(shuffled.values.begin() + c * plane,
                                 shuffled.values.begin() + (c + 1) * plane);
      rng.shuffle(channel);
      std::copy(channel.begin(), channel.end(), shuffled.values.begin() + c * plane);
    }
    // height/width may be reinterpreted freely: pooling only sees the plane
    const auto avg2 = average_pool(shuffled);
    const auto mx2 = max_pool(shuffled);
    for (std::size_t c = 0; c < map.channels; ++c) {
      CHECK(avg2.values[c] == doctest::Approx(avg.values[c]).epsilon(1e-6));
      CHECK(mx2.values[c] == mx.values[c]);
    }
  }
}

TEST_CASE("average pool is linear in the map") {
  Rng rng(11);
  FeatureMap m1{"a", 2, 3, 3, {}};
  FeatureMap m2{"b", 2, 3, 3, {}};
  m1.values.resize(18);
  m2.values.resize(18);
  for (auto& v : m1.values) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : m2.values) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  const double a = 2.5, b = -1.25;
  FeatureMap mix{"mix", 2, 3, 3, {}};
  mix.values.resize(18);
  for (std::size_t i = 0; i < 18; ++i) {
    mix.values[i] = static_cast<float>(a * m1.values[i] + b * m2.values[i]);
  }

  const auto pooled_mix = average_pool(mix);
  const auto p1 = average_pool(m1);
  const auto p2 = average_pool(m2);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(pooled_mix.values[c] ==
          doctest::Approx(a * p1.values[c] + b * p2.values[c]).epsilon(1e-5));
  }
}

TEST_CASE("store enforces unique ids and uniform dimension") {
  EmbeddingStore store(3);
  store.insert("a", {1.0f, 2.0f, 3.0f});
  CHECK_THROWS_WITH_AS(store.insert("a", {4.0f, 5.0f, 6.0f}), doctest::Contains("duplicate"),
                       Error);
  CHECK_THROWS_WITH_AS(store.insert("b", {1.0f}), doctest::Contains("dimension"), Error);
  CHECK_THROWS_AS(store.at("missing"), Error);
}

TEST_CASE("KEMB file round-trips bit-exactly and has the documented size") {
  test::TempDir dir;
  EmbeddingStore store(4);
  store.insert("a", {1.5f, -2.25f, 0.0f, 3.0e-7f});
  store.insert("bb", {0.1f, 0.2f, 0.3f, 0.4f});

  const auto path = dir.file("store.kemb");
  write_store(store, path);

  // 16 header bytes + per record (2 + id bytes + 4 * 4)
  const auto expected = 16 + (2 + 1 + 16) + (2 + 2 + 16);
  CHECK(std::filesystem::file_size(path) == expected);

  const EmbeddingStore loaded = read_store(path);
  CHECK(loaded == store);
}

TEST_CASE("empty store round-trips as a header-only file") {
  test::TempDir dir;
  EmbeddingStore store(8);
  const auto path = dir.file("empty.kemb");
  write_store(store, path);
  CHECK(std::filesystem::file_size(path) == 16);

  const EmbeddingStore loaded = read_store(path);
  CHECK(loaded.size() == 0);
  CHECK(loaded.dim() == 8);
}

TEST_CASE("read_store rejects corrupt files") {
  test::TempDir dir;

  SUBCASE("bad magic") {
    const auto path = dir.file("bad.kemb");
    std::ofstream out(path, std::ios::binary);
    out << "XEMB";
    const std::uint32_t rest[3] = {1, 4, 0};
    out.write(reinterpret_cast<const char*>(rest), sizeof(rest));
    out.close();
    CHECK_THROWS_WITH_AS(read_store(path), doctest::Contains("bad magic"), Error);
  }

  SUBCASE("version mismatch") {
    const auto path = dir.file("v9.kemb");
    std::ofstream out(path, std::ios::binary);
    out << "KEMB";
    const std::uint32_t rest[3] = {9, 4, 0};
    out.write(reinterpret_cast<const char*>(rest), sizeof(rest));
    out.close();
    CHECK_THROWS_WITH_AS(read_store(path), doctest::Contains("version"), Error);
  }

  SUBCASE("truncated") {
    EmbeddingStore store(4);
    store.insert("a", {1, 2, 3, 4});
    const auto path = dir.file("trunc.kemb");
    write_store(store, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
    CHECK_THROWS_WITH_AS(read_store(path), doctest::Contains("truncated"), Error);
  }

  SUBCASE("trailing bytes") {
    EmbeddingStore store(4);
    store.insert("a", {1, 2, 3, 4});
    const auto path = dir.file("trail.kemb");
    write_store(store, path);
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << "junk";
    out.close();
    CHECK_THROWS_WITH_AS(read_store(path), doctest::Contains("trailing"), Error);
  }
}
