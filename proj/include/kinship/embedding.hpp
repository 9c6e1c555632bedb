#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace kinship {

/// Pre-pooling C x H x W feature map of one image, channel-major storage.
struct FeatureMap {
  std::string image_id;
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> values;  // size == channels * height * width

  float at(std::uint32_t c, std::uint32_t y, std::uint32_t x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

/// Pooled per-image embedding, stored at 32-bit precision.
struct FeatureVector {
  std::string image_id;
  std::vector<float> values;

  bool operator==(const FeatureVector&) const = default;
};

/// Per-channel mean over the spatial plane; output dimension equals the
/// channel count. Accumulates in 64-bit.
FeatureVector average_pool(const FeatureMap& map);

/// Per-channel maximum over the spatial plane.
FeatureVector max_pool(const FeatureMap& map);

enum class PoolingKind { average, max };

FeatureVector pool(const FeatureMap& map, PoolingKind kind);

/// Immutable-after-load collection of per-image embeddings with one uniform
/// dimension. Entries iterate sorted by image id, so writes are
/// reproducible regardless of insertion order.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::uint32_t dim);

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool empty() const { return vectors_.empty(); }

  /// Throws Error on duplicate id or dimension mismatch.
  void insert(const std::string& image_id, std::vector<float> values);
  void insert(const FeatureVector& vector);

  bool contains(const std::string& image_id) const;

  /// Throws Error on unknown id.
  const std::vector<float>& at(const std::string& image_id) const;

  const std::map<std::string, std::vector<float>>& entries() const { return vectors_; }

  /// Image ids, sorted.
  std::vector<std::string> ids() const;

  bool operator==(const EmbeddingStore& other) const {
    return dim_ == other.dim_ && vectors_ == other.vectors_;
  }

 private:
  std::uint32_t dim_;
  std::map<std::string, std::vector<float>> vectors_;
};

/// Binary embedding file, all integers little-endian:
///   magic "KEMB" | version u32 = 1 | D u32 | N u32 |
///   N records of (id length u16, id bytes UTF-8, D float32 values).
/// The round-trip is bit-exact at stored precision.
void write_store(const EmbeddingStore& store, const std::filesystem::path& path);

/// Reads a KEMB file; throws Error on bad magic, version mismatch,
/// truncation, duplicate ids or trailing bytes.
EmbeddingStore read_store(const std::filesystem::path& path);

/// Widens a stored vector for 64-bit downstream arithmetic.
std::vector<double> widen(const std::vector<float>& values);

}  // namespace kinship
