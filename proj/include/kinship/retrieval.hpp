#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "kinship/embedding.hpp"
#include "kinship/manifest.hpp"
#include "kinship/similarity.hpp"

namespace kinship {

/// Image-pair scoring strategy. score() must be pure and safe to call
/// concurrently.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual double score(const std::vector<float>& probe, const std::vector<float>& gallery) const = 0;
  virtual std::string descriptor() const = 0;
};

/// Cosine similarity of the widened vectors. The pooling tag only labels
/// which pooling produced the embeddings upstream.
class CosineScorer : public PairScorer {
 public:
  explicit CosineScorer(PoolingKind pooling = PoolingKind::average) : pooling_(pooling) {}
  double score(const std::vector<float>& probe, const std::vector<float>& gallery) const override;
  std::string descriptor() const override;

 private:
  PoolingKind pooling_;
};

/// FC similarity: head forward over the combined feature pair, evaluated
/// directed as (probe, gallery). comb1/comb2 are not symmetric in their
/// first block and are deliberately not symmetrized.
class FcScorer : public PairScorer {
 public:
  FcScorer(SimilarityHead head, CombinationKind combination);
  double score(const std::vector<float>& probe, const std::vector<float>& gallery) const override;
  std::string descriptor() const override;
  const SimilarityHead& head() const { return head_; }
  CombinationKind combination() const { return combination_; }

 private:
  SimilarityHead head_;
  CombinationKind combination_;
};

/// Dense probe x gallery image score matrix, rows and columns sorted by id.
struct ScoreTable {
  std::vector<std::string> probe_ids;
  std::vector<std::string> gallery_ids;
  std::vector<double> scores;  // row-major, probe_ids.size() x gallery_ids.size()
  std::string scorer;

  double at(std::size_t probe, std::size_t gallery) const {
    return scores[probe * gallery_ids.size() + gallery];
  }
};

/// Scores every probe image against every gallery image. Rows are
/// partitioned across `threads` workers into a preallocated matrix, so the
/// result is identical for any thread count.
ScoreTable score_pairs(const EmbeddingStore& probe_store, const EmbeddingStore& gallery_store,
                       const PairScorer& scorer, int threads = 1);

/// Per-(probe identity, gallery identity) merged score matrix.
struct MergedScores {
  std::vector<std::string> probe_identities;
  std::vector<std::string> gallery_identities;
  std::vector<double> scores;  // row-major means

  double at(std::size_t probe, std::size_t gallery) const {
    return scores[probe * gallery_identities.size() + gallery];
  }
};

/// Arithmetic mean over all probe-image x gallery-image scores of each
/// identity pair. Image ids are resolved through the manifests; an
/// unresolvable id throws Error.
MergedScores merge_by_identity(const ScoreTable& table, const DatasetManifest& probe_manifest,
                               const DatasetManifest& gallery_manifest);

/// One probe identity's ordered gallery. scores is parallel to
/// gallery_identities and may be empty for lists loaded from rank-only CSV.
struct RankedList {
  std::string probe_identity;
  std::vector<std::string> gallery_identities;
  std::vector<double> scores;
};

/// Sorts each probe's gallery identities by merged score descending, ties
/// broken lexicographically by gallery id. When exclude_self is set, a
/// gallery identity equal to the probe identity is dropped from that
/// probe's list.
std::vector<RankedList> rank(const MergedScores& merged, bool exclude_self = false);

/// One row per probe identity: probe_id,gallery_id_1,gallery_id_2,...
void write_ranked_csv(const std::vector<RankedList>& lists, const std::filesystem::path& path);

std::vector<RankedList> read_ranked_csv(const std::filesystem::path& path);

/// Audit companion: probe_id,gallery_id,score rows in rank order.
void write_ranked_scores_csv(const std::vector<RankedList>& lists,
                             const std::filesystem::path& path);

/// Image-level score table as probe_image,gallery_image,score rows.
void write_score_table_csv(const ScoreTable& table, const std::filesystem::path& path);

ScoreTable read_score_table_csv(const std::filesystem::path& path);

}  // namespace kinship
