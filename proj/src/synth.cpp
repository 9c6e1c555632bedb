#include "kinship/synth.hpp"

#include <cstdio>

#include "kinship/error.hpp"
#include "kinship/rng.hpp"

namespace kinship {

namespace {

std::string padded(const char* prefix, int value, int width) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%s%0*d", prefix, width, value);
  return buffer;
}

void validate(const SynthParams& params) {
  if (params.n_families < 1) throw Error("synth: n_families must be >= 1");
  if (params.identities_per_family < 2) throw Error("synth: identities_per_family must be >= 2");
  if (params.images_per_identity < 1) throw Error("synth: images_per_identity must be >= 1");
  if (params.dim < 1) throw Error("synth: dim must be >= 1");
  if (params.family_spread < 0.0 || params.identity_spread < 0.0 || params.image_noise < 0.0) {
    throw Error("synth: spreads must be >= 0");
  }
}

}  // namespace

SynthData generate(const SynthParams& params) {
  validate(params);
  Rng rng(params.seed);

  std::vector<FamilyRecord> families;
  EmbeddingStore store(static_cast<std::uint32_t>(params.dim));
  std::vector<std::string> probe_identities;
  std::vector<std::string> gallery_identities;

  std::vector<double> family_center(params.dim);
  std::vector<double> identity_center(params.dim);

  for (int f = 0; f < params.n_families; ++f) {
    FamilyRecord family;
    family.id = padded("F", f + 1, 4);
    for (int d = 0; d < params.dim; ++d) family_center[d] = rng.normal(0.0, params.family_spread);

    for (int i = 0; i < params.identities_per_family; ++i) {
      IdentityRecord identity;
      identity.id = family.id + "/" + padded("MID", i + 1, 2);
      for (int d = 0; d < params.dim; ++d) {
        identity_center[d] = family_center[d] + rng.normal(0.0, params.identity_spread);
      }

      for (int p = 0; p < params.images_per_identity; ++p) {
        const std::string image_id = identity.id + "/" + padded("P", p + 1, 4);
        std::vector<float> values(params.dim);
        for (int d = 0; d < params.dim; ++d) {
          values[d] = static_cast<float>(identity_center[d] + rng.normal(0.0, params.image_noise));
        }
        store.insert(image_id, std::move(values));
        identity.images.push_back(image_id);
      }

      (i == 0 ? probe_identities : gallery_identities).push_back(identity.id);
      family.identities.push_back(std::move(identity));
    }
    families.push_back(std::move(family));
  }

  SynthData data{DatasetManifest::from_families(std::move(families)), std::move(store),
                 std::move(probe_identities), std::move(gallery_identities)};
  return data;
}

EmbeddingStore filter_store_by_identities(const EmbeddingStore& store,
                                          const DatasetManifest& manifest,
                                          const std::vector<std::string>& identities) {
  EmbeddingStore filtered(store.dim());
  for (const auto& identity : identities) {
    for (const auto& image : manifest.images_of_identity(identity)) {
      filtered.insert(image, store.at(image));
    }
  }
  return filtered;
}

}  // namespace kinship
