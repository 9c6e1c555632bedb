#include "kinship/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "kinship/error.hpp"

namespace kinship {

namespace {

using nlohmann::json;

std::string lower(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return text;
}

bool is_image_file(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

}  // namespace

DatasetManifest DatasetManifest::from_families(std::vector<FamilyRecord> families) {
  DatasetManifest manifest;

  std::sort(families.begin(), families.end(),
            [](const FamilyRecord& a, const FamilyRecord& b) { return a.id < b.id; });
  for (auto& family : families) {
    std::sort(family.identities.begin(), family.identities.end(),
              [](const IdentityRecord& a, const IdentityRecord& b) { return a.id < b.id; });
    for (auto& identity : family.identities) {
      std::sort(identity.images.begin(), identity.images.end());
    }
  }

  std::set<std::string> family_ids;
  std::vector<std::string> offenders;
  for (const auto& family : families) {
    if (!family_ids.insert(family.id).second) {
      throw Error("duplicate family id '" + family.id + "'");
    }
    if (family.identities.size() < 2) {
      offenders.push_back(family.id);
    }
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& id : offenders) list += (list.empty() ? "" : ", ") + id;
    throw Error("family must have at least two identities: " + list);
  }

  for (const auto& family : families) {
    for (const auto& identity : family.identities) {
      if (identity.images.empty()) {
        throw Error("identity '" + identity.id + "' in family '" + family.id + "' has no images");
      }
      if (!manifest.identity_to_family_.emplace(identity.id, family.id).second) {
        throw Error("duplicate identity id '" + identity.id + "'");
      }
      for (const auto& image : identity.images) {
        if (!manifest.image_to_identity_.emplace(image, identity.id).second) {
          throw Error("duplicate image id '" + image + "'");
        }
      }
    }
  }

  manifest.families_ = std::move(families);
  for (const auto& family : manifest.families_) {
    for (const auto& identity : family.identities) {
      manifest.identity_index_.emplace(identity.id, &identity);
    }
  }
  return manifest;
}

bool DatasetManifest::has_image(const std::string& image_id) const {
  return image_to_identity_.count(image_id) > 0;
}

bool DatasetManifest::has_identity(const std::string& identity_id) const {
  return identity_to_family_.count(identity_id) > 0;
}

const std::string& DatasetManifest::identity_of(const std::string& image_id) const {
  const auto it = image_to_identity_.find(image_id);
  if (it == image_to_identity_.end()) throw Error("unknown image id '" + image_id + "'");
  return it->second;
}

const std::string& DatasetManifest::family_of_image(const std::string& image_id) const {
  return family_of_identity(identity_of(image_id));
}

const std::string& DatasetManifest::family_of_identity(const std::string& identity_id) const {
  const auto it = identity_to_family_.find(identity_id);
  if (it == identity_to_family_.end()) throw Error("unknown identity id '" + identity_id + "'");
  return it->second;
}

bool DatasetManifest::same_family(const std::string& image_a, const std::string& image_b) const {
  return family_of_image(image_a) == family_of_image(image_b);
}

const std::vector<std::string>& DatasetManifest::images_of_identity(
    const std::string& identity_id) const {
  const auto it = identity_index_.find(identity_id);
  if (it == identity_index_.end()) throw Error("unknown identity id '" + identity_id + "'");
  return it->second->images;
}

std::vector<std::string> DatasetManifest::identity_ids() const {
  std::vector<std::string> ids;
  ids.reserve(identity_to_family_.size());
  for (const auto& family : families_) {
    for (const auto& identity : family.identities) ids.push_back(identity.id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::string> DatasetManifest::image_ids() const {
  std::vector<std::string> ids;
  ids.reserve(image_to_identity_.size());
  for (const auto& family : families_) {
    for (const auto& identity : family.identities) {
      ids.insert(ids.end(), identity.images.begin(), identity.images.end());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

DatasetManifest scan_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::exists(root)) throw Error("dataset root '" + root.string() + "' does not exist");
  if (!fs::is_directory(root)) throw Error("dataset root '" + root.string() + "' is not a directory");

  std::vector<FamilyRecord> families;
  for (const auto& family_entry : fs::directory_iterator(root)) {
    if (!family_entry.is_directory()) continue;
    FamilyRecord family;
    family.id = family_entry.path().filename().string();

    for (const auto& identity_entry : fs::directory_iterator(family_entry.path())) {
      if (!identity_entry.is_directory()) continue;
      IdentityRecord identity;
      identity.id = family.id + "/" + identity_entry.path().filename().string();

      for (const auto& image_entry : fs::directory_iterator(identity_entry.path())) {
        if (!image_entry.is_regular_file() || !is_image_file(image_entry.path())) continue;
        identity.images.push_back(identity.id + "/" + image_entry.path().stem().string());
      }
      if (identity.images.empty()) {
        throw Error("identity folder '" + identity.id + "' contains no images");
      }
      family.identities.push_back(std::move(identity));
    }
    families.push_back(std::move(family));
  }

  if (families.empty()) throw Error("no families found under '" + root.string() + "'");
  return DatasetManifest::from_families(std::move(families));
}

void persist_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  json doc;
  doc["families"] = json::array();
  for (const auto& family : manifest.families()) {
    json jfamily;
    jfamily["id"] = family.id;
    jfamily["identities"] = json::array();
    for (const auto& identity : family.identities) {
      json jidentity;
      jidentity["id"] = identity.id;
      jidentity["images"] = identity.images;
      jfamily["identities"].push_back(std::move(jidentity));
    }
    doc["families"].push_back(std::move(jfamily));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw Error("failed writing manifest to '" + path.string() + "'");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");

  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error("malformed manifest '" + path.string() + "': " + e.what());
  }

  if (!doc.is_object() || !doc.contains("families") || !doc["families"].is_array()) {
    throw Error("malformed manifest '" + path.string() + "': missing \"families\" array");
  }

  std::vector<FamilyRecord> families;
  try {
    for (const auto& jfamily : doc["families"]) {
      FamilyRecord family;
      family.id = jfamily.at("id").get<std::string>();
      for (const auto& jidentity : jfamily.at("identities")) {
        IdentityRecord identity;
        identity.id = jidentity.at("id").get<std::string>();
        identity.images = jidentity.at("images").get<std::vector<std::string>>();
        family.identities.push_back(std::move(identity));
      }
      families.push_back(std::move(family));
    }
  } catch (const json::exception& e) {
    throw Error("malformed manifest '" + path.string() + "': " + e.what());
  }

  return DatasetManifest::from_families(std::move(families));
}

}  // namespace kinship
