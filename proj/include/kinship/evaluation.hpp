#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kinship/manifest.hpp"
#include "kinship/retrieval.hpp"
#include "kinship/training.hpp"

namespace kinship {

/// Probe identity -> gallery identities of the same family, the probe's own
/// identity excluded. Sets may be empty (probe with no relatives in the
/// gallery).
struct RelevanceJudgments {
  std::map<std::string, std::set<std::string>> relevant;
};

/// Derives judgments from the manifests: a gallery identity is relevant to
/// a probe iff they share a family id and differ as identities.
RelevanceJudgments build_judgments(const DatasetManifest& probe_manifest,
                                   const DatasetManifest& gallery_manifest,
                                   const std::vector<std::string>& probe_identities,
                                   const std::vector<std::string>& gallery_identities);

/// AP = (1/|relevant|) * sum over ranks r holding a relevant item of
/// (relevant items in the top r) / r. relevant must be non-empty.
double average_precision(const std::vector<std::string>& ranked,
                         const std::set<std::string>& relevant);

struct MetricValue {
  double value = 0.0;
  std::size_t evaluated_probes = 0;
  std::size_t excluded_probes = 0;  // probes with no relevant gallery identity
};

/// Mean AP over probes with at least one relevant identity; empty-relevance
/// probes are excluded from the denominator and counted. Throws Error when
/// a judged probe has no ranked list.
MetricValue mean_average_precision(const std::vector<RankedList>& ranked_lists,
                                   const RelevanceJudgments& judgments);

/// Fraction of judged probes whose top K contains at least one relevant
/// identity. Same exclusion policy as mAP.
MetricValue rank_at_k(const std::vector<RankedList>& ranked_lists,
                      const RelevanceJudgments& judgments, int k);

/// Arithmetic mean of mAP and Rank@K, the challenge's final ranking value.
double composite_score(double map_value, double rank_at_k_value);

struct MetricsReport {
  double map = 0.0;
  std::map<int, double> rank_at_k;  // K -> value
  double composite = 0.0;           // mean of map and rank_at_k at the configured K
  std::size_t evaluated_probes = 0;
  std::size_t excluded_probes = 0;
  std::string config;
};

/// mAP, Rank@K and the composite in one pass.
MetricsReport evaluate(const std::vector<RankedList>& ranked_lists,
                       const RelevanceJudgments& judgments, int k, const std::string& config = "");

/// {"map":..., "rank_at_k":{"10":...}, "composite":..., "excluded_probes":...,
/// "config":...}
void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path);

std::string metrics_to_json(const MetricsReport& report);

/// Ablation grid over similarity channel x loss x variant, reproducing the
/// shape of the FC and cosine result tables: FC cells pair a loss with a
/// feature combination, cosine cells pair a loss with a pooling variant.
struct GridSpec {
  std::vector<LossKind> losses;
  std::vector<CombinationKind> fc_combinations;
  std::vector<PoolingKind> cosine_poolings;
};

struct GridInputs {
  const DatasetManifest* manifest = nullptr;
  const EmbeddingStore* train_store = nullptr;
  const std::vector<LabeledPair>* pairs = nullptr;
  /// Probe/gallery stores per pooling variant. With pre-pooled vectors the
  /// two entries may alias the same store.
  const EmbeddingStore* probe_avg = nullptr;
  const EmbeddingStore* gallery_avg = nullptr;
  const EmbeddingStore* probe_max = nullptr;
  const EmbeddingStore* gallery_max = nullptr;
  TrainConfig train_config;
  int k = 10;
  int threads = 1;
};

struct GridCell {
  std::string channel;  // "fc" or "cosine"
  LossKind loss = LossKind::bce;
  std::string variant;  // comb1/comb2 or max/avg
  std::optional<MetricsReport> report;
  std::string error;  // set when the cell failed
};

/// Runs every cell independently; a failing cell records its error and the
/// rest of the grid still completes.
std::vector<GridCell> run_grid(const GridInputs& inputs, const GridSpec& spec);

/// CSV with one row per grid cell: channel,loss,variant,map,rank_at_k,
/// composite,excluded_probes,status.
void write_grid_csv(const std::vector<GridCell>& cells, int k, const std::filesystem::path& path);

}  // namespace kinship
