// Command line front end for the kinship retrieval pipeline:
//   scan -> sample -> train -> score -> rank -> eval, plus synth and grid.
// Every subcommand reads and writes only the documented file formats, so
// stages can be replaced by external tools. All randomness flows through
// --seed and reruns with identical inputs produce byte-identical outputs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kinship/embedding.hpp"
#include "kinship/error.hpp"
#include "kinship/evaluation.hpp"
#include "kinship/manifest.hpp"
#include "kinship/pairing.hpp"
#include "kinship/retrieval.hpp"
#include "kinship/similarity.hpp"
#include "kinship/synth.hpp"
#include "kinship/training.hpp"

namespace {

using namespace kinship;

std::filesystem::path with_suffix(const std::filesystem::path& path, const std::string& suffix) {
  std::filesystem::path result = path;
  result.replace_filename(path.stem().string() + suffix + path.extension().string());
  return result;
}

void log_config(const std::string& subcommand, const std::string& details) {
  std::cerr << "[kinship] " << subcommand << " " << details << "\n";
}

struct ScorerChoice {
  std::string name = "cosine-avg";

  bool is_cosine() const { return name.rfind("cosine", 0) == 0; }
  PoolingKind pooling() const {
    return name == "cosine-max" ? PoolingKind::max : PoolingKind::average;
  }
  CombinationKind combination() const {
    return name == "fc-comb2" ? CombinationKind::comb2 : CombinationKind::comb1;
  }
};

std::unique_ptr<PairScorer> make_scorer(const ScorerChoice& choice,
                                        const std::string& checkpoint_path) {
  if (choice.is_cosine()) {
    return std::make_unique<CosineScorer>(choice.pooling());
  }
  if (checkpoint_path.empty()) {
    throw Error("--checkpoint is required for fc scorers");
  }
  Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  if (checkpoint.combination != choice.combination()) {
    throw Error(std::string("checkpoint was trained with ") +
                to_string(checkpoint.combination) + ", but --scorer asks for " +
                to_string(choice.combination()));
  }
  return std::make_unique<FcScorer>(std::move(checkpoint.head), checkpoint.combination);
}

std::vector<std::size_t> parse_hidden_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const std::size_t end = text.find(',', begin);
    const std::string field =
        text.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
    if (field.empty()) throw Error("bad --hidden-dims entry in '" + text + "'");
    dims.push_back(std::stoul(field));
    if (end == std::string::npos) break;
    begin = end + 1;
  }
  return dims;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Kinship retrieval pipeline: similarity training, scoring, "
               "ranking and evaluation over face embeddings"};
  app.require_subcommand(1);

  // ---- scan ----------------------------------------------------------
  auto* scan = app.add_subcommand("scan", "Build a manifest from a family/identity image tree");
  std::string scan_root;
  std::string scan_out;
  scan->add_option("root", scan_root, "Dataset root directory")->required();
  scan->add_option("--out", scan_out, "Manifest JSON output path")->required();

  // ---- synth ---------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate synthetic family-structured embeddings");
  SynthParams synth_params;
  std::string synth_out;
  synth->add_option("--families", synth_params.n_families, "Number of families");
  synth->add_option("--identities", synth_params.identities_per_family, "Identities per family");
  synth->add_option("--images", synth_params.images_per_identity, "Images per identity");
  synth->add_option("--dim", synth_params.dim, "Embedding dimension");
  synth->add_option("--family-spread", synth_params.family_spread, "Family center scale");
  synth->add_option("--identity-spread", synth_params.identity_spread, "Identity offset scale");
  synth->add_option("--image-noise", synth_params.image_noise, "Per-image noise scale");
  synth->add_option("--seed", synth_params.seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // ---- sample --------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "Sample labeled training pairs from a manifest");
  std::string sample_manifest;
  std::size_t n_pos = 5000;
  std::size_t n_neg = 5000;
  std::uint64_t sample_seed = 0;
  std::string sample_out;
  sample->add_option("--manifest", sample_manifest, "Manifest JSON")->required();
  sample->add_option("--n-pos", n_pos, "Positive pairs to sample");
  sample->add_option("--n-neg", n_neg, "Negative pairs to sample");
  sample->add_option("--seed", sample_seed, "Sampler seed");
  sample->add_option("--out", sample_out, "Pairs CSV output path")->required();

  // ---- train ---------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train the FC similarity head on labeled pairs");
  std::string train_embeddings;
  std::string train_pairs_path;
  ScorerChoice train_scorer;
  TrainConfig train_config;
  std::string hidden_dims_text = "100,25";
  std::string train_out;
  train_cmd->add_option("--embeddings", train_embeddings, "KEMB embedding store")->required();
  train_cmd->add_option("--pairs", train_pairs_path, "Pairs CSV")->required();
  train_cmd->add_option("--scorer", train_scorer.name, "fc-comb1 or fc-comb2")
      ->check(CLI::IsMember({"fc-comb1", "fc-comb2"}))
      ->required();
  std::string train_loss = "bce";
  train_cmd->add_option("--loss", train_loss, "Loss kind")
      ->check(CLI::IsMember({"bce", "focal"}));
  train_cmd->add_option("--gamma", train_config.gamma, "Focal loss gamma");
  train_cmd->add_option("--lr", train_config.learning_rate, "Learning rate");
  train_cmd->add_option("--epochs", train_config.epochs, "Training epochs");
  train_cmd->add_option("--batch-size", train_config.batch_size, "Mini-batch size");
  train_cmd->add_option("--seed", train_config.seed, "Init/shuffle seed");
  train_cmd->add_option("--hidden-dims", hidden_dims_text, "Hidden layer widths, comma separated");
  train_cmd->add_option("--out", train_out, "Checkpoint JSON output path")->required();

  // ---- score ---------------------------------------------------------
  auto* score = app.add_subcommand("score", "Score every probe image against every gallery image");
  std::string probe_embeddings;
  std::string gallery_embeddings;
  ScorerChoice score_scorer;
  std::string score_checkpoint;
  int score_threads = 1;
  std::string score_out;
  score->add_option("--probe-embeddings", probe_embeddings, "Probe KEMB store")->required();
  score->add_option("--gallery-embeddings", gallery_embeddings, "Gallery KEMB store")->required();
  score->add_option("--scorer", score_scorer.name, "Scoring method")
      ->check(CLI::IsMember({"cosine-avg", "cosine-max", "fc-comb1", "fc-comb2"}));
  score->add_option("--checkpoint", score_checkpoint, "Head checkpoint (fc scorers)");
  score->add_option("--threads", score_threads, "Worker threads");
  score->add_option("--out", score_out, "Score CSV output path")->required();

  // ---- rank ----------------------------------------------------------
  auto* rank_cmd = app.add_subcommand("rank", "Merge image scores per identity and rank");
  std::string rank_scores;
  std::string rank_manifest;
  bool exclude_self = false;
  std::string rank_out;
  rank_cmd->add_option("scores", rank_scores, "Score CSV from the score subcommand")->required();
  rank_cmd->add_option("--manifest", rank_manifest, "Manifest JSON resolving image identities")
      ->required();
  rank_cmd->add_flag("--exclude-self", exclude_self,
                     "Drop a probe's own identity from its ranked gallery");
  rank_cmd->add_option("--out", rank_out, "Ranked-list CSV output path")->required();

  // ---- eval ----------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Compute mAP, Rank@K and the composite score");
  std::string eval_ranked;
  std::string eval_manifest;
  int eval_k = 10;
  std::string eval_out;
  eval_cmd->add_option("ranked", eval_ranked, "Ranked-list CSV from the rank subcommand")
      ->required();
  eval_cmd->add_option("--manifest", eval_manifest, "Manifest JSON for relevance judgments")
      ->required();
  eval_cmd->add_option("--k", eval_k, "K for Rank@K");
  eval_cmd->add_option("--out", eval_out, "Metrics JSON output path")->required();

  // ---- grid ----------------------------------------------------------
  auto* grid_cmd = app.add_subcommand("grid", "Run the loss x combination / pooling ablation grid");
  std::string grid_manifest;
  std::string grid_embeddings;
  std::string grid_pairs;
  std::string grid_probe;
  std::string grid_gallery;
  TrainConfig grid_train_config;
  int grid_k = 10;
  int grid_threads = 1;
  std::string grid_out;
  grid_cmd->add_option("--manifest", grid_manifest, "Manifest JSON")->required();
  grid_cmd->add_option("--embeddings", grid_embeddings, "KEMB store for training pairs")
      ->required();
  grid_cmd->add_option("--pairs", grid_pairs, "Pairs CSV for head training")->required();
  grid_cmd->add_option("--probe-embeddings", grid_probe, "Probe KEMB store")->required();
  grid_cmd->add_option("--gallery-embeddings", grid_gallery, "Gallery KEMB store")->required();
  grid_cmd->add_option("--gamma", grid_train_config.gamma, "Focal loss gamma");
  grid_cmd->add_option("--lr", grid_train_config.learning_rate, "Learning rate");
  grid_cmd->add_option("--epochs", grid_train_config.epochs, "Training epochs");
  grid_cmd->add_option("--batch-size", grid_train_config.batch_size, "Mini-batch size");
  grid_cmd->add_option("--seed", grid_train_config.seed, "Training seed");
  grid_cmd->add_option("--k", grid_k, "K for Rank@K");
  grid_cmd->add_option("--threads", grid_threads, "Worker threads for scoring");
  grid_cmd->add_option("--out", grid_out, "Grid CSV output path")->required();

  CLI11_PARSE(app, argc, argv);

  if (scan->parsed()) {
    log_config("scan", "root=" + scan_root);
    const DatasetManifest manifest = scan_dataset(scan_root);
    persist_manifest(manifest, scan_out);
    std::cerr << "[kinship] wrote " << scan_out << " (" << manifest.family_count()
              << " families, " << manifest.identity_count() << " identities, "
              << manifest.image_count() << " images)\n";
    return 0;
  }

  if (synth->parsed()) {
    log_config("synth", "seed=" + std::to_string(synth_params.seed) +
                            " families=" + std::to_string(synth_params.n_families) +
                            " dim=" + std::to_string(synth_params.dim));
    const SynthData data = generate(synth_params);
    const std::filesystem::path out_dir(synth_out);
    std::filesystem::create_directories(out_dir);
    persist_manifest(data.manifest, out_dir / "manifest.json");
    write_store(data.store, out_dir / "embeddings.kemb");
    write_store(filter_store_by_identities(data.store, data.manifest, data.probe_identities),
                out_dir / "probe.kemb");
    write_store(filter_store_by_identities(data.store, data.manifest, data.gallery_identities),
                out_dir / "gallery.kemb");
    std::cerr << "[kinship] wrote manifest.json, embeddings.kemb, probe.kemb, gallery.kemb under "
              << synth_out << "\n";
    return 0;
  }

  if (sample->parsed()) {
    log_config("sample", "seed=" + std::to_string(sample_seed) + " n_pos=" +
                             std::to_string(n_pos) + " n_neg=" + std::to_string(n_neg));
    const DatasetManifest manifest = load_manifest(sample_manifest);
    const PairSample pairs = sample_pairs(manifest, n_pos, n_neg, sample_seed);
    write_pairs_csv(pairs, sample_out);
    if (pairs.shortfall()) {
      std::cerr << "[kinship] shortfall: emitted " << pairs.emitted_positive << "/" << n_pos
                << " positives and " << pairs.emitted_negative << "/" << n_neg
                << " negatives (exhausted distinct pairs)\n";
    }
    std::cerr << "[kinship] wrote " << sample_out << " (" << pairs.pairs.size() << " pairs)\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    train_config.loss_kind = loss_from_string(train_loss);
    train_config.hidden_dims = parse_hidden_dims(hidden_dims_text);
    log_config("train", std::string("scorer=") + train_scorer.name + " loss=" + train_loss +
                            " lr=" + std::to_string(train_config.learning_rate) +
                            " epochs=" + std::to_string(train_config.epochs) +
                            " batch=" + std::to_string(train_config.batch_size) +
                            " seed=" + std::to_string(train_config.seed));
    const EmbeddingStore store = read_store(train_embeddings);
    const auto pairs = read_pairs_csv(train_pairs_path);
    const auto result = train(store, pairs, train_scorer.combination(), train_config);

    save_checkpoint(result.head, train_scorer.combination(), train_out);
    // Training report: loss history + config echo. Elapsed time goes to the
    // log, not the file, so reruns stay byte-identical.
    const auto report_path = with_suffix(train_out, "_report");
    {
      nlohmann::json report;
      report["loss"] = to_string(train_config.loss_kind);
      report["combination"] = to_string(train_scorer.combination());
      report["gamma"] = train_config.gamma;
      report["learning_rate"] = train_config.learning_rate;
      report["epochs"] = train_config.epochs;
      report["batch_size"] = train_config.batch_size;
      report["seed"] = train_config.seed;
      report["pairs"] = result.report.pair_count;
      report["epoch_mean_loss"] = result.report.epoch_mean_loss;
      std::ofstream out(report_path, std::ios::binary);
      if (!out) throw Error("cannot open '" + report_path.string() + "' for writing");
      out << report.dump(2) << "\n";
      if (!out) throw Error("failed writing report to '" + report_path.string() + "'");
    }
    std::cerr << "[kinship] trained " << result.report.epoch_mean_loss.size()
              << " epochs in " << result.report.elapsed_seconds << "s, final loss "
              << result.report.epoch_mean_loss.back() << "; wrote " << train_out << " and "
              << report_path.string() << "\n";
    return 0;
  }

  if (score->parsed()) {
    log_config("score", "scorer=" + score_scorer.name +
                            " threads=" + std::to_string(score_threads));
    const EmbeddingStore probe = read_store(probe_embeddings);
    const EmbeddingStore gallery = read_store(gallery_embeddings);
    const auto scorer = make_scorer(score_scorer, score_checkpoint);
    const ScoreTable table = score_pairs(probe, gallery, *scorer, score_threads);
    write_score_table_csv(table, score_out);
    std::cerr << "[kinship] wrote " << score_out << " (" << table.probe_ids.size() << " x "
              << table.gallery_ids.size() << " scores)\n";
    return 0;
  }

  if (rank_cmd->parsed()) {
    log_config("rank", "scores=" + rank_scores);
    const DatasetManifest manifest = load_manifest(rank_manifest);
    const ScoreTable table = read_score_table_csv(rank_scores);
    const MergedScores merged = merge_by_identity(table, manifest, manifest);
    const auto lists = rank(merged, exclude_self);
    write_ranked_csv(lists, rank_out);
    const auto scores_path = with_suffix(rank_out, "_scores");
    write_ranked_scores_csv(lists, scores_path);
    std::cerr << "[kinship] wrote " << rank_out << " and " << scores_path.string() << " ("
              << lists.size() << " probes)\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    log_config("eval", "k=" + std::to_string(eval_k));
    const DatasetManifest manifest = load_manifest(eval_manifest);
    const auto lists = read_ranked_csv(eval_ranked);
    if (lists.empty()) throw Error("ranked-list file '" + eval_ranked + "' is empty");

    std::vector<std::string> probe_identities;
    std::set<std::string> gallery_set;
    for (const auto& list : lists) {
      probe_identities.push_back(list.probe_identity);
      gallery_set.insert(list.gallery_identities.begin(), list.gallery_identities.end());
    }
    const std::vector<std::string> gallery_identities(gallery_set.begin(), gallery_set.end());
    const auto judgments =
        build_judgments(manifest, manifest, probe_identities, gallery_identities);
    const MetricsReport report = evaluate(lists, judgments, eval_k, "ranked=" + eval_ranked);
    write_metrics_json(report, eval_out);
    std::cerr << "[kinship] mAP=" << report.map << " rank@" << eval_k << "="
              << report.rank_at_k.at(eval_k) << " composite=" << report.composite << " ("
              << report.excluded_probes << " probes excluded); wrote " << eval_out << "\n";
    return 0;
  }

  if (grid_cmd->parsed()) {
    log_config("grid", "k=" + std::to_string(grid_k) +
                           " seed=" + std::to_string(grid_train_config.seed));
    const DatasetManifest manifest = load_manifest(grid_manifest);
    const EmbeddingStore train_store = read_store(grid_embeddings);
    const auto pairs = read_pairs_csv(grid_pairs);
    const EmbeddingStore probe = read_store(grid_probe);
    const EmbeddingStore gallery = read_store(grid_gallery);

    GridInputs inputs;
    inputs.manifest = &manifest;
    inputs.train_store = &train_store;
    inputs.pairs = &pairs;
    // Pre-pooled vectors back both pooling variants; the two cosine columns
    // coincide unless the stores were pooled differently upstream.
    inputs.probe_avg = &probe;
    inputs.gallery_avg = &gallery;
    inputs.probe_max = &probe;
    inputs.gallery_max = &gallery;
    inputs.train_config = grid_train_config;
    inputs.k = grid_k;
    inputs.threads = grid_threads;

    GridSpec spec;
    spec.losses = {LossKind::focal, LossKind::bce};
    spec.fc_combinations = {CombinationKind::comb1, CombinationKind::comb2};
    spec.cosine_poolings = {PoolingKind::max, PoolingKind::average};

    const auto cells = run_grid(inputs, spec);
    write_grid_csv(cells, grid_k, grid_out);
    for (const auto& cell : cells) {
      if (cell.report.has_value()) {
        std::cerr << "[kinship] " << cell.channel << "/" << to_string(cell.loss) << "/"
                  << cell.variant << ": composite=" << cell.report->composite << "\n";
      } else {
        std::cerr << "[kinship] " << cell.channel << "/" << to_string(cell.loss) << "/"
                  << cell.variant << ": FAILED (" << cell.error << ")\n";
      }
    }
    std::cerr << "[kinship] wrote " << grid_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
