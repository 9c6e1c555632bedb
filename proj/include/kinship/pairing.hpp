#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kinship/manifest.hpp"

namespace kinship {

/// One training pair; label 1 iff the two images share a family.
struct LabeledPair {
  std::string image_a;
  std::string image_b;
  int label = 0;

  bool operator==(const LabeledPair&) const = default;
};

struct PairSample {
  std::vector<LabeledPair> pairs;  // positives first, then negatives
  std::size_t requested_positive = 0;
  std::size_t requested_negative = 0;
  std::size_t emitted_positive = 0;
  std::size_t emitted_negative = 0;
  std::uint64_t seed = 0;
  std::string algorithm;

  bool shortfall() const {
    return emitted_positive < requested_positive || emitted_negative < requested_negative;
  }
};

/// Samples n_pos same-family and n_neg cross-family unordered image pairs
/// without replacement, deterministically for a fixed (manifest, seed). When
/// fewer distinct pairs exist than requested, emits all of them and reports
/// the shortfall through the emitted counts. Positives include same-identity
/// pairs (family members by definition); each pair is canonicalized so
/// image_a < image_b. Throws Error when n_neg > 0 on a single-family
/// manifest.
PairSample sample_pairs(const DatasetManifest& manifest, std::size_t n_pos, std::size_t n_neg,
                        std::uint64_t seed);

/// CSV with header image_a,image_b,label, UTF-8, LF line endings. Leading
/// '#' comment lines record the sampler algorithm, seed and counts.
void write_pairs_csv(const PairSample& sample, const std::filesystem::path& path);

/// Reads a pairs CSV (comment lines skipped).
std::vector<LabeledPair> read_pairs_csv(const std::filesystem::path& path);

}  // namespace kinship
