#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kinship/embedding.hpp"
#include "kinship/manifest.hpp"

namespace kinship {

/// Parameters of the synthetic family-structured embedding generator: a
/// Gaussian mixture where identities share a family center and images share
/// an identity center, so retrieval difficulty is controlled by the spread
/// ratios.
struct SynthParams {
  int n_families = 20;
  int identities_per_family = 3;
  int images_per_identity = 3;
  int dim = 64;
  double family_spread = 10.0;  // scale of family centers
  double identity_spread = 1.0;
  double image_noise = 1.0;
  std::uint64_t seed = 0;
};

struct SynthData {
  DatasetManifest manifest;
  EmbeddingStore store;  // every image
  std::vector<std::string> probe_identities;
  std::vector<std::string> gallery_identities;
};

/// Generates manifest and embeddings, bit-identical for a fixed seed.
/// Family centers ~ N(0, family_spread^2 I); identity centers add
/// N(0, identity_spread^2 I); images add N(0, image_noise^2 I). The split
/// assigns the first identity of each family to the probe set and the rest
/// to the gallery, so every probe has at least one relevant gallery
/// identity.
SynthData generate(const SynthParams& params);

/// Store restricted to images of the given identities.
EmbeddingStore filter_store_by_identities(const EmbeddingStore& store,
                                          const DatasetManifest& manifest,
                                          const std::vector<std::string>& identities);

}  // namespace kinship
