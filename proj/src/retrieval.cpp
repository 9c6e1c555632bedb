#include "kinship/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <thread>

#include "kinship/error.hpp"
#include "text_util.hpp"

namespace kinship {

namespace {

using detail::format_double;
using detail::split;

double parse_double(const std::string& text, const std::string& context) {
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw Error(context + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

std::size_t index_of(const std::vector<std::string>& sorted_ids, const std::string& id,
                     const std::string& context) {
  const auto it = std::lower_bound(sorted_ids.begin(), sorted_ids.end(), id);
  if (it == sorted_ids.end() || *it != id) throw Error(context + ": unknown id '" + id + "'");
  return static_cast<std::size_t>(it - sorted_ids.begin());
}

}  // namespace

double CosineScorer::score(const std::vector<float>& probe,
                           const std::vector<float>& gallery) const {
  return cosine_similarity(widen(probe), widen(gallery));
}

std::string CosineScorer::descriptor() const {
  return pooling_ == PoolingKind::average ? "cosine-avg" : "cosine-max";
}

FcScorer::FcScorer(SimilarityHead head, CombinationKind combination)
    : head_(std::move(head)), combination_(combination) {}

double FcScorer::score(const std::vector<float>& probe, const std::vector<float>& gallery) const {
  return head_.forward(combine(combination_, widen(probe), widen(gallery)));
}

std::string FcScorer::descriptor() const {
  return std::string("fc-") + to_string(combination_);
}

ScoreTable score_pairs(const EmbeddingStore& probe_store, const EmbeddingStore& gallery_store,
                       const PairScorer& scorer, int threads) {
  if (threads < 1) throw Error("thread count must be >= 1");

  ScoreTable table;
  table.probe_ids = probe_store.ids();
  table.gallery_ids = gallery_store.ids();
  table.scorer = scorer.descriptor();
  table.scores.resize(table.probe_ids.size() * table.gallery_ids.size());

  std::vector<const std::vector<float>*> probe_vecs;
  std::vector<const std::vector<float>*> gallery_vecs;
  probe_vecs.reserve(table.probe_ids.size());
  gallery_vecs.reserve(table.gallery_ids.size());
  for (const auto& id : table.probe_ids) probe_vecs.push_back(&probe_store.at(id));
  for (const auto& id : table.gallery_ids) gallery_vecs.push_back(&gallery_store.at(id));

  const std::size_t rows = probe_vecs.size();
  const std::size_t cols = gallery_vecs.size();

  auto score_rows = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      double* out = table.scores.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        out[c] = scorer.score(*probe_vecs[r], *gallery_vecs[c]);
      }
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), rows);
  if (workers <= 1) {
    score_rows(0, rows);
    return table;
  }

  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(workers);
  const std::size_t chunk = (rows + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(rows, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        score_rows(begin, end);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& worker : pool) worker.join();
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  return table;
}

MergedScores merge_by_identity(const ScoreTable& table, const DatasetManifest& probe_manifest,
                               const DatasetManifest& gallery_manifest) {
  std::vector<std::string> probe_identity_of(table.probe_ids.size());
  std::vector<std::string> gallery_identity_of(table.gallery_ids.size());
  for (std::size_t i = 0; i < table.probe_ids.size(); ++i) {
    probe_identity_of[i] = probe_manifest.identity_of(table.probe_ids[i]);
  }
  for (std::size_t i = 0; i < table.gallery_ids.size(); ++i) {
    gallery_identity_of[i] = gallery_manifest.identity_of(table.gallery_ids[i]);
  }

  MergedScores merged;
  merged.probe_identities = probe_identity_of;
  std::sort(merged.probe_identities.begin(), merged.probe_identities.end());
  merged.probe_identities.erase(
      std::unique(merged.probe_identities.begin(), merged.probe_identities.end()),
      merged.probe_identities.end());
  merged.gallery_identities = gallery_identity_of;
  std::sort(merged.gallery_identities.begin(), merged.gallery_identities.end());
  merged.gallery_identities.erase(
      std::unique(merged.gallery_identities.begin(), merged.gallery_identities.end()),
      merged.gallery_identities.end());

  std::vector<std::size_t> gallery_index(table.gallery_ids.size());
  for (std::size_t c = 0; c < table.gallery_ids.size(); ++c) {
    gallery_index[c] = index_of(merged.gallery_identities, gallery_identity_of[c], "merge");
  }

  const std::size_t cols = merged.gallery_identities.size();
  std::vector<double> sums(merged.probe_identities.size() * cols, 0.0);
  std::vector<std::size_t> counts(sums.size(), 0);

  for (std::size_t r = 0; r < table.probe_ids.size(); ++r) {
    const std::size_t pi = index_of(merged.probe_identities, probe_identity_of[r], "merge");
    for (std::size_t c = 0; c < table.gallery_ids.size(); ++c) {
      sums[pi * cols + gallery_index[c]] += table.at(r, c);
      counts[pi * cols + gallery_index[c]] += 1;
    }
  }

  merged.scores.resize(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) {
    merged.scores[i] = sums[i] / static_cast<double>(counts[i]);
  }
  return merged;
}

std::vector<RankedList> rank(const MergedScores& merged, bool exclude_self) {
  std::vector<RankedList> lists;
  lists.reserve(merged.probe_identities.size());

  for (std::size_t p = 0; p < merged.probe_identities.size(); ++p) {
    const std::string& probe = merged.probe_identities[p];

    std::vector<std::size_t> order;
    order.reserve(merged.gallery_identities.size());
    for (std::size_t g = 0; g < merged.gallery_identities.size(); ++g) {
      if (exclude_self && merged.gallery_identities[g] == probe) continue;
      order.push_back(g);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double sa = merged.at(p, a);
      const double sb = merged.at(p, b);
      if (sa != sb) return sa > sb;
      return merged.gallery_identities[a] < merged.gallery_identities[b];
    });

    RankedList list;
    list.probe_identity = probe;
    list.gallery_identities.reserve(order.size());
    list.scores.reserve(order.size());
    for (const std::size_t g : order) {
      list.gallery_identities.push_back(merged.gallery_identities[g]);
      list.scores.push_back(merged.at(p, g));
    }
    lists.push_back(std::move(list));
  }
  return lists;
}

void write_ranked_csv(const std::vector<RankedList>& lists, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (const auto& list : lists) {
    out << list.probe_identity;
    for (const auto& gallery : list.gallery_identities) out << "," << gallery;
    out << "\n";
  }
  if (!out) throw Error("failed writing ranked lists to '" + path.string() + "'");
}

std::vector<RankedList> read_ranked_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open ranked list file '" + path.string() + "'");

  std::vector<RankedList> lists;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, ',');
    RankedList list;
    list.probe_identity = fields.front();
    list.gallery_identities.assign(fields.begin() + 1, fields.end());
    lists.push_back(std::move(list));
  }
  return lists;
}

void write_ranked_scores_csv(const std::vector<RankedList>& lists,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "probe_id,gallery_id,score\n";
  for (const auto& list : lists) {
    for (std::size_t i = 0; i < list.gallery_identities.size(); ++i) {
      out << list.probe_identity << "," << list.gallery_identities[i] << ","
          << format_double(list.scores[i]) << "\n";
    }
  }
  if (!out) throw Error("failed writing ranked scores to '" + path.string() + "'");
}

void write_score_table_csv(const ScoreTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "# scorer: " << table.scorer << "\n";
  out << "probe_image,gallery_image,score\n";
  for (std::size_t r = 0; r < table.probe_ids.size(); ++r) {
    for (std::size_t c = 0; c < table.gallery_ids.size(); ++c) {
      out << table.probe_ids[r] << "," << table.gallery_ids[c] << ","
          << format_double(table.at(r, c)) << "\n";
    }
  }
  if (!out) throw Error("failed writing scores to '" + path.string() + "'");
}

ScoreTable read_score_table_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open score file '" + path.string() + "'");

  std::string scorer;
  std::vector<std::string> probe_ids;
  std::vector<std::string> gallery_ids;
  struct Entry {
    std::string probe;
    std::string gallery;
    double score;
  };
  std::vector<Entry> entries;

  std::string line;
  bool header_seen = false;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# scorer: ", 0) == 0) {
      scorer = line.substr(10);
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {
      if (line != "probe_image,gallery_image,score") {
        throw Error("score file '" + path.string() + "' has unexpected header '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != 3) {
      throw Error("score file '" + path.string() + "' line " + std::to_string(line_number) +
                  " is not probe_image,gallery_image,score");
    }
    entries.push_back(Entry{fields[0], fields[1],
                            parse_double(fields[2], "score file '" + path.string() + "'")});
    probe_ids.push_back(fields[0]);
    gallery_ids.push_back(fields[1]);
  }
  if (!header_seen) throw Error("score file '" + path.string() + "' has no header");

  std::sort(probe_ids.begin(), probe_ids.end());
  probe_ids.erase(std::unique(probe_ids.begin(), probe_ids.end()), probe_ids.end());
  std::sort(gallery_ids.begin(), gallery_ids.end());
  gallery_ids.erase(std::unique(gallery_ids.begin(), gallery_ids.end()), gallery_ids.end());

  ScoreTable table;
  table.scorer = scorer;
  table.probe_ids = std::move(probe_ids);
  table.gallery_ids = std::move(gallery_ids);
  table.scores.assign(table.probe_ids.size() * table.gallery_ids.size(),
                      std::numeric_limits<double>::quiet_NaN());
  for (const auto& entry : entries) {
    const std::size_t r = index_of(table.probe_ids, entry.probe, "score file");
    const std::size_t c = index_of(table.gallery_ids, entry.gallery, "score file");
    double& cell = table.scores[r * table.gallery_ids.size() + c];
    if (!std::isnan(cell)) {
      throw Error("score file '" + path.string() + "' has a duplicate entry for (" + entry.probe +
                  ", " + entry.gallery + ")");
    }
    cell = entry.score;
  }
  for (const double value : table.scores) {
    if (std::isnan(value)) {
      throw Error("score file '" + path.string() + "' does not cover every probe x gallery pair");
    }
  }
  return table;
}

}  // namespace kinship
