#include "kinship/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "kinship/error.hpp"

namespace kinship {

namespace {

constexpr char kMagic[4] = {'K', 'E', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

void check_finite(const std::vector<float>& values, const std::string& image_id) {
  for (float v : values) {
    if (!std::isfinite(v)) throw Error("non-finite value in embedding '" + image_id + "'");
  }
}

void put_u16(std::string& buffer, std::uint16_t value) {
  buffer.push_back(static_cast<char>(value & 0xff));
  buffer.push_back(static_cast<char>((value >> 8) & 0xff));
}

void put_u32(std::string& buffer, std::uint32_t value) {
  for (int shift = 0; shift < 32; shift += 8) {
    buffer.push_back(static_cast<char>((value >> shift) & 0xff));
  }
}

void put_f32(std::string& buffer, float value) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &value, sizeof(bits));
  put_u32(buffer, bits);
}

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  std::uint16_t u16() {
    need(2);
    const auto* bytes = reinterpret_cast<const unsigned char*>(data_.data() + pos_);
    pos_ += 2;
    return static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
  }

  std::uint32_t u32() {
    need(4);
    const auto* bytes = reinterpret_cast<const unsigned char*>(data_.data() + pos_);
    pos_ += 4;
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
  }

  float f32() {
    const std::uint32_t bits = u32();
    float value = 0.0f;
    std::memcpy(&value, &bits, sizeof(value));
    return value;
  }

  std::string bytes(std::size_t count) {
    need(count);
    std::string result = data_.substr(pos_, count);
    pos_ += count;
    return result;
  }

  bool exhausted() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t count) {
    if (pos_ + count > data_.size()) {
      throw Error("truncated embedding file '" + path_ + "'");
    }
  }

  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

FeatureVector average_pool(const FeatureMap& map) {
  if (map.channels < 1 || map.height < 1 || map.width < 1) {
    throw Error("feature map '" + map.image_id + "' has empty dimensions");
  }
  if (map.values.size() !=
      static_cast<std::size_t>(map.channels) * map.height * map.width) {
    throw Error("feature map '" + map.image_id + "' value count does not match C*H*W");
  }
  const std::size_t plane = static_cast<std::size_t>(map.height) * map.width;
  FeatureVector result;
  result.image_id = map.image_id;
  result.values.resize(map.channels);
  for (std::uint32_t c = 0; c < map.channels; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      sum += static_cast<double>(map.values[c * plane + i]);
    }
    result.values[c] = static_cast<float>(sum / static_cast<double>(plane));
  }
  return result;
}

FeatureVector max_pool(const FeatureMap& map) {
  if (map.channels < 1 || map.height < 1 || map.width < 1) {
    throw Error("feature map '" + map.image_id + "' has empty dimensions");
  }
  if (map.values.size() !=
      static_cast<std::size_t>(map.channels) * map.height * map.width) {
    throw Error("feature map '" + map.image_id + "' value count does not match C*H*W");
  }
  const std::size_t plane = static_cast<std::size_t>(map.height) * map.width;
  FeatureVector result;
  result.image_id = map.image_id;
  result.values.resize(map.channels);
  for (std::uint32_t c = 0; c < map.channels; ++c) {
    float best = map.values[c * plane];
    for (std::size_t i = 1; i < plane; ++i) {
      best = std::max(best, map.values[c * plane + i]);
    }
    result.values[c] = best;
  }
  return result;
}

FeatureVector pool(const FeatureMap& map, PoolingKind kind) {
  return kind == PoolingKind::average ? average_pool(map) : max_pool(map);
}

EmbeddingStore::EmbeddingStore(std::uint32_t dim) : dim_(dim) {
  if (dim < 1) throw Error("embedding dimension must be positive");
}

void EmbeddingStore::insert(const std::string& image_id, std::vector<float> values) {
  if (values.size() != dim_) {
    throw Error("embedding '" + image_id + "' has dimension " +
                std::to_string(values.size()) + ", store expects " + std::to_string(dim_));
  }
  check_finite(values, image_id);
  if (!vectors_.emplace(image_id, std::move(values)).second) {
    throw Error("duplicate embedding id '" + image_id + "'");
  }
}

void EmbeddingStore::insert(const FeatureVector& vector) { insert(vector.image_id, vector.values); }

bool EmbeddingStore::contains(const std::string& image_id) const {
  return vectors_.count(image_id) > 0;
}

const std::vector<float>& EmbeddingStore::at(const std::string& image_id) const {
  const auto it = vectors_.find(image_id);
  if (it == vectors_.end()) throw Error("unknown embedding id '" + image_id + "'");
  return it->second;
}

std::vector<std::string> EmbeddingStore::ids() const {
  std::vector<std::string> result;
  result.reserve(vectors_.size());
  for (const auto& [id, _] : vectors_) result.push_back(id);
  return result;
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::string buffer;
  buffer.append(kMagic, sizeof(kMagic));
  put_u32(buffer, kVersion);
  put_u32(buffer, store.dim());
  put_u32(buffer, static_cast<std::uint32_t>(store.size()));

  for (const auto& [id, values] : store.entries()) {
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error("embedding id '" + id.substr(0, 32) + "...' exceeds 65535 bytes");
    }
    put_u16(buffer, static_cast<std::uint16_t>(id.size()));
    buffer.append(id);
    for (float v : values) put_f32(buffer, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw Error("failed writing embeddings to '" + path.string() + "'");
}

EmbeddingStore read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader reader(std::move(data), path.string());
  const std::string magic = reader.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw Error("bad magic in '" + path.string() + "': expected KEMB");
  }
  const std::uint32_t version = reader.u32();
  if (version != kVersion) {
    throw Error("unsupported embedding file version " + std::to_string(version) + " in '" +
                path.string() + "'");
  }
  const std::uint32_t dim = reader.u32();
  const std::uint32_t count = reader.u32();
  if (dim < 1) throw Error("embedding file '" + path.string() + "' declares dimension 0");

  EmbeddingStore store(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t id_length = reader.u16();
    const std::string id = reader.bytes(id_length);
    std::vector<float> values(dim);
    for (std::uint32_t d = 0; d < dim; ++d) values[d] = reader.f32();
    store.insert(id, std::move(values));
  }
  if (!reader.exhausted()) {
    throw Error("trailing bytes after last record in '" + path.string() + "'");
  }
  return store;
}

std::vector<double> widen(const std::vector<float>& values) {
  return std::vector<double>(values.begin(), values.end());
}

}  // namespace kinship
