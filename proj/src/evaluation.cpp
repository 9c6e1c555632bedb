#include "kinship/evaluation.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "kinship/error.hpp"
#include "text_util.hpp"

namespace kinship {

namespace {

using nlohmann::json;

const RankedList* find_list(const std::vector<RankedList>& lists, const std::string& probe) {
  for (const auto& list : lists) {
    if (list.probe_identity == probe) return &list;
  }
  return nullptr;
}

}  // namespace

RelevanceJudgments build_judgments(const DatasetManifest& probe_manifest,
                                   const DatasetManifest& gallery_manifest,
                                   const std::vector<std::string>& probe_identities,
                                   const std::vector<std::string>& gallery_identities) {
  RelevanceJudgments judgments;
  for (const auto& probe : probe_identities) {
    const std::string& family = probe_manifest.family_of_identity(probe);
    std::set<std::string> relevant;
    for (const auto& gallery : gallery_identities) {
      if (gallery == probe) continue;
      if (gallery_manifest.family_of_identity(gallery) == family) relevant.insert(gallery);
    }
    judgments.relevant.emplace(probe, std::move(relevant));
  }
  return judgments;
}

double average_precision(const std::vector<std::string>& ranked,
                         const std::set<std::string>& relevant) {
  if (relevant.empty()) throw Error("average precision undefined for an empty relevant set");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (relevant.count(ranked[r]) > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

MetricValue mean_average_precision(const std::vector<RankedList>& ranked_lists,
                                   const RelevanceJudgments& judgments) {
  MetricValue result;
  double sum = 0.0;
  for (const auto& [probe, relevant] : judgments.relevant) {
    if (relevant.empty()) {
      ++result.excluded_probes;
      continue;
    }
    const RankedList* list = find_list(ranked_lists, probe);
    if (list == nullptr) throw Error("no ranked list for judged probe '" + probe + "'");
    sum += average_precision(list->gallery_identities, relevant);
    ++result.evaluated_probes;
  }
  result.value = result.evaluated_probes == 0
                     ? 0.0
                     : sum / static_cast<double>(result.evaluated_probes);
  return result;
}

MetricValue rank_at_k(const std::vector<RankedList>& ranked_lists,
                      const RelevanceJudgments& judgments, int k) {
  if (k < 1) throw Error("rank@k requires k >= 1");
  MetricValue result;
  std::size_t hits = 0;
  for (const auto& [probe, relevant] : judgments.relevant) {
    if (relevant.empty()) {
      ++result.excluded_probes;
      continue;
    }
    const RankedList* list = find_list(ranked_lists, probe);
    if (list == nullptr) throw Error("no ranked list for judged probe '" + probe + "'");
    ++result.evaluated_probes;
    const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                  list->gallery_identities.size());
    for (std::size_t r = 0; r < top; ++r) {
      if (relevant.count(list->gallery_identities[r]) > 0) {
        ++hits;
        break;
      }
    }
  }
  result.value = result.evaluated_probes == 0
                     ? 0.0
                     : static_cast<double>(hits) / static_cast<double>(result.evaluated_probes);
  return result;
}

double composite_score(double map_value, double rank_at_k_value) {
  if (map_value < 0.0 || map_value > 1.0 || rank_at_k_value < 0.0 || rank_at_k_value > 1.0) {
    throw Error("composite score inputs must lie in [0, 1]");
  }
  return (map_value + rank_at_k_value) / 2.0;
}

MetricsReport evaluate(const std::vector<RankedList>& ranked_lists,
                       const RelevanceJudgments& judgments, int k, const std::string& config) {
  const MetricValue map = mean_average_precision(ranked_lists, judgments);
  const MetricValue rank_k = rank_at_k(ranked_lists, judgments, k);

  MetricsReport report;
  report.map = map.value;
  report.rank_at_k[k] = rank_k.value;
  report.composite = composite_score(map.value, rank_k.value);
  report.evaluated_probes = map.evaluated_probes;
  report.excluded_probes = map.excluded_probes;
  report.config = config;
  return report;
}

std::string metrics_to_json(const MetricsReport& report) {
  json doc;
  doc["map"] = report.map;
  doc["rank_at_k"] = json::object();
  for (const auto& [k, value] : report.rank_at_k) doc["rank_at_k"][std::to_string(k)] = value;
  doc["composite"] = report.composite;
  doc["evaluated_probes"] = report.evaluated_probes;
  doc["excluded_probes"] = report.excluded_probes;
  doc["config"] = report.config;
  return doc.dump(2) + "\n";
}

void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << metrics_to_json(report);
  if (!out) throw Error("failed writing metrics to '" + path.string() + "'");
}

namespace {

MetricsReport run_fc_cell(const GridInputs& inputs, LossKind loss, CombinationKind combination) {
  TrainConfig config = inputs.train_config;
  config.loss_kind = loss;
  auto trained = train(*inputs.train_store, *inputs.pairs, combination, config);

  FcScorer scorer(std::move(trained.head), combination);
  const ScoreTable table =
      score_pairs(*inputs.probe_avg, *inputs.gallery_avg, scorer, inputs.threads);
  const MergedScores merged = merge_by_identity(table, *inputs.manifest, *inputs.manifest);
  const auto lists = rank(merged);

  std::vector<std::string> probe_identities;
  for (const auto& list : lists) probe_identities.push_back(list.probe_identity);
  const auto judgments = build_judgments(*inputs.manifest, *inputs.manifest, probe_identities,
                                         merged.gallery_identities);
  return evaluate(lists, judgments, inputs.k,
                  std::string("fc-") + to_string(combination) + "+" + to_string(loss));
}

MetricsReport run_cosine_cell(const GridInputs& inputs, LossKind loss, PoolingKind pooling) {
  const EmbeddingStore* probe =
      pooling == PoolingKind::average ? inputs.probe_avg : inputs.probe_max;
  const EmbeddingStore* gallery =
      pooling == PoolingKind::average ? inputs.gallery_avg : inputs.gallery_max;

  CosineScorer scorer(pooling);
  const ScoreTable table = score_pairs(*probe, *gallery, scorer, inputs.threads);
  const MergedScores merged = merge_by_identity(table, *inputs.manifest, *inputs.manifest);
  const auto lists = rank(merged);

  std::vector<std::string> probe_identities;
  for (const auto& list : lists) probe_identities.push_back(list.probe_identity);
  const auto judgments = build_judgments(*inputs.manifest, *inputs.manifest, probe_identities,
                                         merged.gallery_identities);
  return evaluate(lists, judgments, inputs.k,
                  scorer.descriptor() + "+" + to_string(loss));
}

}  // namespace

std::vector<GridCell> run_grid(const GridInputs& inputs, const GridSpec& spec) {
  std::vector<GridCell> cells;
  for (const LossKind loss : spec.losses) {
    for (const CombinationKind combination : spec.fc_combinations) {
      GridCell cell;
      cell.channel = "fc";
      cell.loss = loss;
      cell.variant = to_string(combination);
      try {
        cell.report = run_fc_cell(inputs, loss, combination);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  for (const LossKind loss : spec.losses) {
    for (const PoolingKind pooling : spec.cosine_poolings) {
      GridCell cell;
      cell.channel = "cosine";
      cell.loss = loss;
      cell.variant = pooling == PoolingKind::average ? "avg" : "max";
      try {
        cell.report = run_cosine_cell(inputs, loss, pooling);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_grid_csv(const std::vector<GridCell>& cells, int k, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "channel,loss,variant,map,rank_at_" << k << ",composite,excluded_probes,status\n";
  for (const auto& cell : cells) {
    out << cell.channel << "," << to_string(cell.loss) << "," << cell.variant << ",";
    if (cell.report.has_value()) {
      const MetricsReport& report = *cell.report;
      out << detail::format_double(report.map) << ","
          << detail::format_double(report.rank_at_k.at(k)) << ","
          << detail::format_double(report.composite) << "," << report.excluded_probes << ",ok\n";
    } else {
      std::string status = cell.error;
      std::replace(status.begin(), status.end(), ',', ';');
      std::replace(status.begin(), status.end(), '\n', ' ');
      out << ",,,," << status << "\n";
    }
  }
  if (!out) throw Error("failed writing grid to '" + path.string() + "'");
}

}  // namespace kinship
