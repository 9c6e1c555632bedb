#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace kinship {

struct IdentityRecord {
  std::string id;
  std::vector<std::string> images;

  bool operator==(const IdentityRecord&) const = default;
};

struct FamilyRecord {
  std::string id;
  std::vector<IdentityRecord> identities;

  bool operator==(const FamilyRecord&) const = default;
};

/// Family -> identity -> image hierarchy of a dataset, plus the index maps
/// that answer kinship queries. Immutable once constructed; all ids are
/// globally unique, every family has at least two identities and every
/// identity at least one image.
class DatasetManifest {
 public:
  /// Validates the invariants, sorts every level by id and builds the
  /// image -> identity -> family index. Throws Error naming the offender on
  /// any violation.
  static DatasetManifest from_families(std::vector<FamilyRecord> families);

  const std::vector<FamilyRecord>& families() const { return families_; }

  std::size_t family_count() const { return families_.size(); }
  std::size_t identity_count() const { return identity_to_family_.size(); }
  std::size_t image_count() const { return image_to_identity_.size(); }

  bool has_image(const std::string& image_id) const;
  bool has_identity(const std::string& identity_id) const;

  /// Identity owning an image. Throws Error on unknown id.
  const std::string& identity_of(const std::string& image_id) const;

  /// Family owning an image. Throws Error on unknown id.
  const std::string& family_of_image(const std::string& image_id) const;

  /// Family owning an identity. Throws Error on unknown id.
  const std::string& family_of_identity(const std::string& identity_id) const;

  /// True iff both images' identities share a family. Symmetric, reflexive
  /// over known images; throws Error on unknown ids.
  bool same_family(const std::string& image_a, const std::string& image_b) const;

  /// Image ids of one identity. Throws Error on unknown id.
  const std::vector<std::string>& images_of_identity(const std::string& identity_id) const;

  /// All identity ids, sorted.
  std::vector<std::string> identity_ids() const;

  /// All image ids, sorted.
  std::vector<std::string> image_ids() const;

  bool operator==(const DatasetManifest& other) const { return families_ == other.families_; }

 private:
  DatasetManifest() = default;

  std::vector<FamilyRecord> families_;
  std::unordered_map<std::string, std::string> image_to_identity_;
  std::unordered_map<std::string, std::string> identity_to_family_;
  std::unordered_map<std::string, const IdentityRecord*> identity_index_;
};

/// Builds a manifest from a two-level directory tree: root/<family>/<identity>/
/// holding image files. Only jpg/jpeg/png files count as images; everything
/// else is ignored. Family ids are the directory names, identity ids are
/// "<family>/<identity>" and image ids "<family>/<identity>/<stem>", which
/// keeps ids stable across runs and globally unique even when identity
/// directory names repeat across families. Output is sorted, so the result
/// does not depend on filesystem enumeration order.
DatasetManifest scan_dataset(const std::filesystem::path& root);

/// Writes the manifest as JSON: {"families":[{"id":...,"identities":[{"id":...,
/// "images":[...]}]}]}, UTF-8, arrays sorted by id.
void persist_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Parses a manifest JSON file and revalidates every invariant.
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace kinship
