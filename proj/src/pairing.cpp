#include "kinship/pairing.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "kinship/error.hpp"
#include "kinship/rng.hpp"

namespace kinship {

namespace {

// Above this many distinct negatives, enumeration gives way to rejection
// sampling with a dedupe set.
constexpr std::uint64_t kEnumerationLimit = 4'000'000;

void check_csv_field(const std::string& field) {
  if (field.find_first_of(",\n\r\"") != std::string::npos) {
    throw Error("image id '" + field + "' contains characters not representable in CSV");
  }
}

LabeledPair make_pair(const std::string& a, const std::string& b, int label) {
  return a < b ? LabeledPair{a, b, label} : LabeledPair{b, a, label};
}

std::vector<std::vector<std::string>> images_by_family(const DatasetManifest& manifest) {
  std::vector<std::vector<std::string>> result;
  result.reserve(manifest.family_count());
  for (const auto& family : manifest.families()) {
    std::vector<std::string> images;
    for (const auto& identity : family.identities) {
      images.insert(images.end(), identity.images.begin(), identity.images.end());
    }
    std::sort(images.begin(), images.end());
    result.push_back(std::move(images));
  }
  return result;
}

}  // namespace

PairSample sample_pairs(const DatasetManifest& manifest, std::size_t n_pos, std::size_t n_neg,
                        std::uint64_t seed) {
  if (manifest.family_count() < 2 && n_neg > 0) {
    throw Error("no negative pairs possible: manifest has a single family");
  }

  const auto family_images = images_by_family(manifest);

  std::uint64_t total_images = 0;
  std::uint64_t positive_count = 0;
  for (const auto& images : family_images) {
    const std::uint64_t m = images.size();
    total_images += m;
    positive_count += m * (m - 1) / 2;
  }
  const std::uint64_t total_pairs = total_images * (total_images - 1) / 2;
  const std::uint64_t negative_count = total_pairs - positive_count;

  Rng rng(seed);
  PairSample sample;
  sample.requested_positive = n_pos;
  sample.requested_negative = n_neg;
  sample.seed = seed;
  sample.algorithm = std::string("pair-sampler-v1/") + Rng::kAlgorithm;

  // Positives: enumerate every within-family pair, shuffle, truncate.
  std::vector<LabeledPair> positives;
  positives.reserve(static_cast<std::size_t>(positive_count));
  for (const auto& images : family_images) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      for (std::size_t j = i + 1; j < images.size(); ++j) {
        positives.push_back(make_pair(images[i], images[j], 1));
      }
    }
  }
  rng.shuffle(positives);
  if (positives.size() > n_pos) positives.resize(n_pos);
  sample.emitted_positive = positives.size();

  // Negatives: enumerate when the cross-family pair space is small, else
  // rejection-sample without replacement.
  std::vector<LabeledPair> negatives;
  if (n_neg > 0) {
    if (negative_count <= std::max<std::uint64_t>(kEnumerationLimit, n_neg)) {
      negatives.reserve(static_cast<std::size_t>(negative_count));
      for (std::size_t f = 0; f < family_images.size(); ++f) {
        for (std::size_t g = f + 1; g < family_images.size(); ++g) {
          for (const auto& a : family_images[f]) {
            for (const auto& b : family_images[g]) {
              negatives.push_back(make_pair(a, b, 0));
            }
          }
        }
      }
      rng.shuffle(negatives);
      if (negatives.size() > n_neg) negatives.resize(n_neg);
    } else {
      std::vector<std::string> all_images;
      std::vector<std::uint32_t> family_of;
      all_images.reserve(static_cast<std::size_t>(total_images));
      for (std::uint32_t f = 0; f < family_images.size(); ++f) {
        for (const auto& image : family_images[f]) {
          all_images.push_back(image);
          family_of.push_back(f);
        }
      }
      std::unordered_set<std::uint64_t> seen;
      const std::uint64_t draw_cap = 1000 * static_cast<std::uint64_t>(n_neg) + 1'000'000;
      std::uint64_t draws = 0;
      while (negatives.size() < n_neg) {
        if (++draws > draw_cap) {
          throw Error("negative-pair sampling stalled; family sizes are extremely skewed");
        }
        const auto a = static_cast<std::uint32_t>(rng.below(all_images.size()));
        const auto b = static_cast<std::uint32_t>(rng.below(all_images.size()));
        if (a == b || family_of[a] == family_of[b]) continue;
        const std::uint64_t key =
            (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
        if (!seen.insert(key).second) continue;
        negatives.push_back(make_pair(all_images[a], all_images[b], 0));
      }
    }
  }
  sample.emitted_negative = negatives.size();

  sample.pairs = std::move(positives);
  sample.pairs.insert(sample.pairs.end(), negatives.begin(), negatives.end());
  return sample;
}

void write_pairs_csv(const PairSample& sample, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");

  out << "# " << sample.algorithm << " seed=" << sample.seed << "\n";
  out << "# requested_pos=" << sample.requested_positive
      << " requested_neg=" << sample.requested_negative
      << " emitted_pos=" << sample.emitted_positive
      << " emitted_neg=" << sample.emitted_negative << "\n";
  out << "image_a,image_b,label\n";
  for (const auto& pair : sample.pairs) {
    check_csv_field(pair.image_a);
    check_csv_field(pair.image_b);
    out << pair.image_a << "," << pair.image_b << "," << pair.label << "\n";
  }
  if (!out) throw Error("failed writing pairs to '" + path.string() + "'");
}

std::vector<LabeledPair> read_pairs_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open pairs file '" + path.string() + "'");

  std::vector<LabeledPair> pairs;
  std::string line;
  bool header_seen = false;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "image_a,image_b,label") {
        throw Error("pairs file '" + path.string() + "' has unexpected header '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    const auto first = line.find(',');
    const auto second = line.find(',', first == std::string::npos ? first : first + 1);
    if (first == std::string::npos || second == std::string::npos) {
      throw Error("pairs file '" + path.string() + "' line " + std::to_string(line_number) +
                  " is not image_a,image_b,label");
    }
    LabeledPair pair;
    pair.image_a = line.substr(0, first);
    pair.image_b = line.substr(first + 1, second - first - 1);
    const std::string label = line.substr(second + 1);
    if (label == "0") {
      pair.label = 0;
    } else if (label == "1") {
      pair.label = 1;
    } else {
      throw Error("pairs file '" + path.string() + "' line " + std::to_string(line_number) +
                  " has label '" + label + "', expected 0 or 1");
    }
    pairs.push_back(std::move(pair));
  }
  if (!header_seen) throw Error("pairs file '" + path.string() + "' has no header");
  return pairs;
}

}  // namespace kinship
