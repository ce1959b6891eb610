// mladi: weakly-supervised multi-label dialect identification pipeline.
//
// Subcommands cover the whole flow: building per-dialect acceptability
// datasets, training binary scorers with trace logging, cartography metrics
// and annotation export, pseudo-labeling (binary bank / LLM / hybrid
// aggregation), multi-label training with optional curricula, and evaluation.
#include <CLI11.hpp>
#include <iostream>
#include <nlohmann/json.hpp>

#include "mladi/builder.hpp"
#include "mladi/cartography.hpp"
#include "mladi/corpus.hpp"
#include "mladi/curriculum.hpp"
#include "mladi/errors.hpp"
#include "mladi/evaluation.hpp"
#include "mladi/io.hpp"
#include "mladi/llm_client.hpp"
#include "mladi/manifest.hpp"
#include "mladi/pseudo_label.hpp"
#include "mladi/trainer.hpp"

namespace {

using namespace mladi;
using nlohmann::json;

bool g_dry_run = false;

// Prints the resolved plan and reports whether the run should proceed.
bool plan(const RunManifest& manifest, const std::vector<std::string>& outputs) {
  if (!g_dry_run) return true;
  json j = manifest.to_json();
  j.erase("timestamp");
  j["outputs"] = outputs;
  std::cout << j.dump(2) << "\n";
  return false;
}

struct EncoderOpts {
  std::size_t buckets = 1u << 15;
  std::vector<int> ngrams = {2, 3, 4};
  std::uint64_t hash_seed = 0;
  int layers = 1;

  std::shared_ptr<ReferenceEncoder> make() const {
    ReferenceEncoderConfig cfg;
    cfg.buckets = buckets;
    cfg.ngram_sizes = ngrams;
    cfg.hash_seed = hash_seed;
    cfg.layers = layers;
    return std::make_shared<ReferenceEncoder>(cfg);
  }

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--buckets", buckets, "Feature hash buckets");
    cmd->add_option("--ngrams", ngrams, "Character n-gram sizes");
    cmd->add_option("--hash-seed", hash_seed, "Feature hash seed");
    cmd->add_option("--layers", layers, "Encoder layer groups");
  }

  json to_json() const {
    return {{"buckets", buckets}, {"ngrams", ngrams}, {"hash_seed", hash_seed}, {"layers", layers}};
  }
};

struct TrainOpts {
  TrainConfig cfg;

  void add_flags(CLI::App* cmd, bool binary_mode) {
    cmd->add_option("--epochs", cfg.epochs, "Training epochs");
    cmd->add_option("--batch-size", cfg.batch_size, "Batch size");
    cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate");
    cmd->add_option("--dropout", cfg.dropout, "Feature dropout probability");
    cmd->add_option("--freeze", cfg.frozen_bottom_layers, "Frozen bottom encoder layers");
    cmd->add_option("--threshold", cfg.inference_threshold, "Sigmoid decision threshold");
    cmd->add_option("--split-seed", cfg.split_seed, "Train/validation split seed");
    cmd->add_option("--val-fraction", cfg.validation_fraction, "Validation fraction");
    cmd->add_option("--shuffle-seed", cfg.shuffle_seed, "Batch shuffle / dropout seed");
    if (binary_mode) {
      cmd->add_option("--cadence", cfg.trace_cadence_steps, "Trace cadence in steps");
      cmd->add_option("--cadence-fraction", cfg.trace_cadence_fraction,
                      "Trace cadence as a fraction of an epoch (overrides --cadence)");
    }
  }
};

json epoch_log_json(const std::vector<EpochStats>& log) {
  json j = json::array();
  for (const auto& e : log) {
    j.push_back({{"epoch", e.epoch},
                 {"mean_train_loss", e.mean_train_loss},
                 {"val_micro_f1", e.val_micro_f1}});
  }
  return j;
}

std::string jsonl_epoch_log(const std::vector<EpochStats>& log) {
  std::string out;
  for (const auto& e : log) {
    out += json{{"epoch", e.epoch},
                {"mean_train_loss", e.mean_train_loss},
                {"val_micro_f1", e.val_micro_f1}}
               .dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------- build-binary

struct BuildBinaryOpts {
  std::string corpus_path;
  std::string adjacency_path = "data/adjacency.txt";
  std::string dialect = "all";
  std::string mode = "pseudo-label";
  std::string source_filter;
  std::string out_dir;
};

void run_build_binary(const BuildBinaryOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "build-binary";
  manifest.resolved_config = {{"dialect", o.dialect},
                              {"mode", o.mode},
                              {"source_filter", o.source_filter},
                              {"adjacency", o.adjacency_path}};
  manifest.add_input("corpus", o.corpus_path);
  manifest.add_input("adjacency", o.adjacency_path);
  if (!plan(manifest, {o.out_dir})) return;

  auto corpus = load_corpus(o.corpus_path);
  if (!o.source_filter.empty()) {
    const SourceTag tag = source_tag_from_string(o.source_filter);
    std::erase_if(corpus, [&](const Sample& s) { return s.source != tag; });
  }
  const auto table = AdjacencyTable::load(o.adjacency_path);
  const BuildMode mode = build_mode_from_string(o.mode);

  std::vector<DialectLabel> dialects;
  if (o.dialect == "all") {
    dialects = all_dialects();
  } else {
    auto d = DialectLabel::from_code(o.dialect);
    if (!d) throw UsageError("unknown dialect code: " + o.dialect);
    dialects.push_back(*d);
  }
  for (auto dia : dialects) {
    const auto ds = build_binary_dataset(dia, corpus, table, mode);
    save_binary_dataset(ds, std::filesystem::path(o.out_dir) / std::string(dia.code()));
    std::cout << dia.code() << ": " << ds.positives.size() << " positives, "
              << ds.negatives.size() << " negatives\n";
  }
  manifest.write(std::filesystem::path(o.out_dir) / "run_manifest.json");
}

// ---------------------------------------------------------------- train-binary

struct TrainBinaryOpts {
  std::string dataset_dir;
  std::string out_dir;
  EncoderOpts encoder;
  TrainOpts train;
};

void run_train_binary(const TrainBinaryOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "train-binary";
  manifest.resolved_config = {{"dataset", o.dataset_dir},
                              {"encoder", o.encoder.to_json()},
                              {"train", o.train.cfg.to_json()}};
  manifest.seeds = {{"split_seed", o.train.cfg.split_seed},
                    {"shuffle_seed", o.train.cfg.shuffle_seed},
                    {"hash_seed", o.encoder.hash_seed}};
  if (!plan(manifest, {o.out_dir})) return;

  const auto ds = load_binary_dataset(o.dataset_dir);
  auto result = train_binary(ds, o.encoder.make(), o.train.cfg);

  ModelCheckpointInfo info;
  info.kind = "binary";
  info.config = o.train.cfg;
  info.metrics = {{"dialect", std::string(ds.dialect.code())},
                  {"epochs", epoch_log_json(result.log)}};
  save_model(result.scorer, o.out_dir, info);
  save_trace(result.trace, std::filesystem::path(o.out_dir) / "trace.jsonl");
  atomic_write(std::filesystem::path(o.out_dir) / "train_log.jsonl", jsonl_epoch_log(result.log));
  manifest.write(std::filesystem::path(o.out_dir) / "run_manifest.json");
  std::cout << "trained " << ds.dialect.code() << " scorer; trace has "
            << result.trace.checkpoints_per_epoch << " checkpoint(s)/epoch x "
            << result.trace.epochs << " epochs\n";
}

// ----------------------------------------------------------------- cartography

struct CartographyOpts {
  std::string trace_path;
  std::string out_dir;
};

void run_cartography(const CartographyOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "cartography";
  manifest.add_input("trace", o.trace_path);
  if (!plan(manifest, {o.out_dir + "/records.tsv"})) return;

  const auto trace = load_trace(o.trace_path);
  const auto records = compute_metrics(trace);
  std::map<std::string, int> golds;
  for (const auto& e : trace.entries) golds[e.id] = e.gold;
  atomic_write(std::filesystem::path(o.out_dir) / "records.tsv",
               serialize_records(records, golds));
  manifest.write(std::filesystem::path(o.out_dir) / "run_manifest.json");

  std::array<std::size_t, 7> bin_counts{};
  for (const auto& r : records) ++bin_counts[static_cast<std::size_t>(r.bin)];
  for (std::size_t b = 0; b < 7; ++b) {
    std::cout << "bin " << kCorrectnessBinLabels[b] << ": " << bin_counts[b] << "\n";
  }
}

// ------------------------------------------------------------------------ flag

struct FlagOpts {
  std::string records_path;
  std::string out_path;
};

void run_flag(const FlagOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "flag";
  manifest.add_input("records", o.records_path);
  if (!plan(manifest, {o.out_path})) return;

  std::vector<CartographyRecord> records;
  std::map<std::string, int> golds;
  load_records(o.records_path, records, golds);
  const auto flagged = flag_suspect_negatives(records, golds);

  std::map<std::string, const CartographyRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  std::string out = "id\tcorrectness\n";
  for (const auto& id : flagged) {
    out += id + "\t" + format_double(by_id.at(id)->correctness) + "\n";
  }
  atomic_write(o.out_path, out);
  manifest.write(std::filesystem::path(o.out_path).parent_path() / "run_manifest.json");
  std::cout << "flagged " << flagged.size() << " suspect negative(s)\n";
}

// -------------------------------------------------------------- annotate-export

struct AnnotateExportOpts {
  std::string records_path;
  std::string corpus_path;
  std::string out_path;
  std::size_t per_bin = 10;
  std::uint64_t seed = 0;
};

void run_annotate_export(const AnnotateExportOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "annotate-export";
  manifest.resolved_config = {{"per_bin", o.per_bin}};
  manifest.seeds = {{"sample_seed", o.seed}};
  manifest.add_input("records", o.records_path);
  manifest.add_input("corpus", o.corpus_path);
  if (!plan(manifest, {o.out_path})) return;

  std::vector<CartographyRecord> records;
  std::map<std::string, int> golds;
  load_records(o.records_path, records, golds);
  const auto corpus = load_corpus(o.corpus_path);
  AnnotationSheetConfig cfg;
  cfg.per_bin = o.per_bin;
  cfg.seed = o.seed;
  atomic_write(o.out_path, export_annotation_sheet(records, golds, corpus, cfg));
  manifest.write(std::filesystem::path(o.out_path).parent_path() / "run_manifest.json");
}

// ----------------------------------------------------------------- pseudo-label

struct PseudoLabelOpts {
  std::string corpus_path;
  std::string out_path;
  std::string source = "bin";  // bin | gpt
  std::string bank_dir;
  double bank_threshold = 0.5;
  bool live = false;
  bool replay = false;
  std::string fixtures_dir;
  std::string cache_dir;
  std::string template_path;
  int retries = 2;
  int max_inflight = 1;
  std::string endpoint_url;
  std::string endpoint_model = "gpt-4o";
  std::string api_key_env = "MLADI_API_KEY";
};

LlmAnnotationClient make_client(const PseudoLabelOpts& o) {
  LlmClientConfig cfg;
  cfg.mode = o.live ? ClientMode::kLive : ClientMode::kReplay;
  cfg.fixtures_dir = o.fixtures_dir;
  cfg.cache_dir = o.cache_dir;
  cfg.max_retries = o.retries;
  cfg.max_inflight = o.max_inflight;
  cfg.endpoint.base_url = o.endpoint_url;
  cfg.endpoint.model = o.endpoint_model;
  cfg.endpoint.api_key_env = o.api_key_env;
  if (!o.template_path.empty()) cfg.prompt_template = read_file(o.template_path);
  return LlmAnnotationClient(std::move(cfg));
}

void run_pseudo_label(const PseudoLabelOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "pseudo-label";
  manifest.resolved_config = {{"source", o.source},
                              {"bank", o.bank_dir},
                              {"bank_threshold", o.bank_threshold},
                              {"mode", o.live ? "live" : "replay"},
                              {"retries", o.retries},
                              {"max_inflight", o.max_inflight}};
  manifest.add_input("corpus", o.corpus_path);
  if (!plan(manifest, {o.out_path})) return;

  const auto corpus = load_corpus(o.corpus_path);
  std::vector<LabeledSample> labeled;
  if (o.source == "bin") {
    if (o.bank_dir.empty()) throw UsageError("--bank is required with --source bin");
    const auto bank = load_bank(o.bank_dir, o.bank_threshold);
    labeled = label_with_bank(corpus, bank);
  } else if (o.source == "gpt") {
    auto client = make_client(o);
    labeled = label_with_llm(corpus, client);
  } else {
    throw UsageError("--source must be bin or gpt");
  }
  save_labeled(labeled, o.out_path);
  manifest.write(std::filesystem::path(o.out_path).parent_path() / "run_manifest.json");
  std::cout << "labeled " << labeled.size() << " sample(s) with source " << o.source << "\n";
}

// -------------------------------------------------------------------- aggregate

struct AggregateOpts {
  std::string corpus_path;
  std::string bin_path;
  std::string gpt_path;
  std::string out_path;
  std::string routing = "default";
};

void run_aggregate(const AggregateOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "aggregate";
  manifest.resolved_config = {{"aldi_routing", o.routing},
                              {"mid_range", "[1/9, 7/9] -> gpt (closed)"}};
  manifest.add_input("corpus", o.corpus_path);
  if (!o.bin_path.empty()) manifest.add_input("bin", o.bin_path);
  if (!o.gpt_path.empty()) manifest.add_input("gpt", o.gpt_path);
  if (!plan(manifest, {o.out_path})) return;

  if (o.routing != "default") throw UsageError("unknown --aldi-routing: " + o.routing);

  auto index_by_id = [](const std::vector<LabeledSample>& ds) {
    std::map<std::string, const LabeledSample*> m;
    for (const auto& ls : ds) m[ls.sample.id] = &ls;
    return m;
  };
  std::vector<LabeledSample> bin_ds, gpt_ds;
  if (!o.bin_path.empty()) bin_ds = load_labeled(o.bin_path);
  if (!o.gpt_path.empty()) gpt_ds = load_labeled(o.gpt_path);
  const auto bin_by_id = index_by_id(bin_ds);
  const auto gpt_by_id = index_by_id(gpt_ds);

  const auto corpus = load_corpus(o.corpus_path);
  std::vector<LabeledSample> hybrid;
  std::size_t dropped = 0;
  for (const auto& s : corpus) {
    const RoutedSource source = route_for_aldi(require_aldi(s));
    const auto& table = source == RoutedSource::kBinaryClassifiers ? bin_by_id : gpt_by_id;
    auto it = table.find(s.id);
    if (it == table.end()) {
      throw DataError("sample '" + s.id + "' routes to " + to_string(source) +
                      " but has no vector in that file");
    }
    if (it->second->labels.cardinality() == 0) {
      ++dropped;
      continue;
    }
    LabeledSample ls;
    ls.sample = s;
    ls.labels = it->second->labels;
    ls.provenance = Provenance::kHybrid;
    ls.routed_source = to_string(source);
    hybrid.push_back(std::move(ls));
  }
  save_labeled(hybrid, o.out_path);
  manifest.write(std::filesystem::path(o.out_path).parent_path() / "run_manifest.json");
  std::cout << "aggregated " << hybrid.size() << " sample(s); dropped " << dropped
            << " zero-cardinality\n";
}

// ------------------------------------------------------------------------ train

struct TrainMultilabelOpts {
  std::string dataset_path;
  std::string out_dir;
  EncoderOpts encoder;
  TrainOpts train;
};

void run_train(const TrainMultilabelOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "train";
  manifest.resolved_config = {{"encoder", o.encoder.to_json()}, {"train", o.train.cfg.to_json()}};
  manifest.seeds = {{"split_seed", o.train.cfg.split_seed},
                    {"shuffle_seed", o.train.cfg.shuffle_seed},
                    {"hash_seed", o.encoder.hash_seed}};
  manifest.add_input("dataset", o.dataset_path);
  if (!plan(manifest, {o.out_dir})) return;

  auto ds = load_labeled(o.dataset_path);
  auto filtered = filter_zero_cardinality(ds);
  if (filtered.dropped > 0) {
    std::cerr << "[mladi] dropped " << filtered.dropped << " zero-cardinality sample(s)\n";
  }
  auto result = train_multilabel(filtered.kept, o.encoder.make(), o.train.cfg);

  ModelCheckpointInfo info;
  info.kind = "multilabel";
  info.config = o.train.cfg;
  info.metrics = {{"best_epoch", result.best_epoch},
                  {"best_val_micro_f1", result.best_val_micro_f1},
                  {"epochs", epoch_log_json(result.log)}};
  save_model(result.model, o.out_dir, info);
  atomic_write(std::filesystem::path(o.out_dir) / "train_log.jsonl", jsonl_epoch_log(result.log));
  manifest.write(std::filesystem::path(o.out_dir) / "run_manifest.json");
  std::cout << "best epoch " << result.best_epoch << " (val micro F1 "
            << format_double(result.best_val_micro_f1) << ")\n";
}

// ----------------------------------------------------------------- loss-profile

struct LossProfileOpts {
  std::string model_dir;
  std::string dataset_path;
  std::string kind = "cardinality";
  std::string out_dir;
};

void run_loss_profile(const LossProfileOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "loss-profile";
  manifest.resolved_config = {{"kind", o.kind}};
  manifest.add_input("dataset", o.dataset_path);
  if (!plan(manifest, {o.out_dir})) return;

  const auto model = load_model(o.model_dir);
  const auto ds = load_labeled(o.dataset_path);
  const auto losses = per_example_loss(model, ds);

  std::string losses_tsv = "id\tloss\n";
  for (const auto& [id, loss] : losses) losses_tsv += id + "\t" + format_double(loss) + "\n";
  atomic_write(std::filesystem::path(o.out_dir) / "per_example_loss.tsv", losses_tsv);

  const auto spec = partition(ds, bucket_kind_from_string(o.kind));
  const auto profile = loss_profile(spec, losses);
  atomic_write(std::filesystem::path(o.out_dir) / "loss_profile.tsv", loss_profile_tsv(profile));
  atomic_write(std::filesystem::path(o.out_dir) / "loss_profile.svg",
               loss_profile_svg(profile, o.kind));
  manifest.write(std::filesystem::path(o.out_dir) / "run_manifest.json");
}

// --------------------------------------------------------------------- schedule

struct ScheduleOpts {
  std::string dataset_path;
  std::string losses_path;
  std::string kind = "cardinality";
  std::uint64_t seed = 0;
  std::string replay_rule = "min-prior";
  std::size_t replay_count = 0;
  double replay_fraction = 1.0;
  std::string out_path;
};

std::map<std::string, double> load_losses(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "id\tloss") {
    throw DataError(path.string() + ": expected header 'id<TAB>loss'");
  }
  std::map<std::string, double> losses;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_tabs(lines[i]);
    if (f.size() != 2) {
      throw DataError(path.string() + " line " + std::to_string(i + 1) + ": expected 2 fields");
    }
    losses[f[0]] = parse_double(f[1], "loss");
  }
  return losses;
}

void run_schedule(const ScheduleOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "schedule";
  manifest.resolved_config = {{"kind", o.kind},
                              {"replay_rule", o.replay_rule},
                              {"replay_count", o.replay_count},
                              {"replay_fraction", o.replay_fraction}};
  manifest.seeds = {{"replay_seed", o.seed}};
  manifest.add_input("dataset", o.dataset_path);
  manifest.add_input("losses", o.losses_path);
  if (!plan(manifest, {o.out_path})) return;

  const auto ds = load_labeled(o.dataset_path);
  const auto spec = partition(ds, bucket_kind_from_string(o.kind));
  const auto losses = load_losses(o.losses_path);
  const auto pi = order_buckets(spec, losses);
  ReplayConfig replay;
  replay.rule = replay_rule_from_string(o.replay_rule);
  replay.fixed_count = o.replay_count;
  replay.fraction = o.replay_fraction;
  const auto schedule = build_schedule(spec, pi, o.seed, replay);
  save_schedule(schedule, o.out_path);
  manifest.write(std::filesystem::path(o.out_path).parent_path() / "run_manifest.json");

  for (const auto& stage : schedule.stages) {
    std::size_t replayed = 0;
    for (const auto& list : stage.replay_ids) replayed += list.size();
    std::cout << "stage " << stage.index << ": " << stage.new_bucket_label << " ("
              << stage.new_member_ids.size() << " new + " << replayed << " replay)\n";
  }
}

// ------------------------------------------------------------- curriculum-train

struct CurriculumTrainOpts {
  std::string dataset_path;
  std::string schedule_path;
  std::string out_dir;
  int passes = 1;
  EncoderOpts encoder;
  TrainOpts train;
};

void run_curriculum_train(const CurriculumTrainOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "curriculum-train";
  manifest.resolved_config = {{"passes_per_stage", o.passes},
                              {"encoder", o.encoder.to_json()},
                              {"train", o.train.cfg.to_json()}};
  manifest.seeds = {{"split_seed", o.train.cfg.split_seed},
                    {"shuffle_seed", o.train.cfg.shuffle_seed}};
  manifest.add_input("dataset", o.dataset_path);
  manifest.add_input("schedule", o.schedule_path);
  if (!plan(manifest, {o.out_dir})) return;

  auto ds = load_labeled(o.dataset_path);
  auto filtered = filter_zero_cardinality(ds);
  const auto schedule = load_schedule(o.schedule_path);
  auto result = run_curriculum(schedule, filtered.kept, o.encoder.make(), o.train.cfg, o.passes);

  ModelCheckpointInfo info;
  info.kind = "multilabel";
  info.config = o.train.cfg;
  json stage_log = json::array();
  for (const auto& s : result.log) {
    stage_log.push_back({{"stage", s.stage},
                         {"new_samples", s.new_samples},
                         {"replay_samples", s.replay_samples},
                         {"mean_train_loss", s.mean_train_loss},
                         {"val_micro_f1", s.val_micro_f1}});
  }
  info.metrics = {{"stages", stage_log}};
  save_model(result.model, o.out_dir, info);
  std::string log_jsonl;
  for (const auto& entry : stage_log) log_jsonl += entry.dump() + "\n";
  atomic_write(std::filesystem::path(o.out_dir) / "train_log.jsonl", log_jsonl);
  manifest.write(std::filesystem::path(o.out_dir) / "run_manifest.json");
  for (const auto& s : result.log) {
    std::cout << "stage " << s.stage << ": " << s.new_samples << " new + " << s.replay_samples
              << " replay, val micro F1 " << format_double(s.val_micro_f1) << "\n";
  }
}

// --------------------------------------------------------------------- evaluate

struct EvaluateOpts {
  std::string model_dir;
  std::string gold_path;
  std::string labelset = "all18";
  double threshold = 0.3;
  std::string out_dir;
};

void run_evaluate(const EvaluateOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "evaluate";
  manifest.resolved_config = {{"labelset", o.labelset}, {"threshold", o.threshold}};
  manifest.add_input("gold", o.gold_path);
  if (!plan(manifest, {o.out_dir + "/report.json", o.out_dir + "/report.tsv"})) return;

  const auto model = load_model(o.model_dir);
  const auto gold = load_labeled(o.gold_path);
  const auto labelset = parse_labelset(o.labelset);
  const auto report = evaluate_run(model, gold, labelset, o.threshold);
  atomic_write(std::filesystem::path(o.out_dir) / "report.json", report.to_json().dump(2) + "\n");
  atomic_write(std::filesystem::path(o.out_dir) / "report.tsv", report.to_tsv());
  manifest.write(std::filesystem::path(o.out_dir) / "run_manifest.json");
  std::cout << "macro P " << format_double(report.macro.precision) << ", R "
            << format_double(report.macro.recall) << ", F1 " << format_double(report.macro.f1)
            << ", acc " << format_double(report.hamming_accuracy) << " ("
            << report.accuracy_definition << ")\n";
}

// ----------------------------------------------------------------- baseline-topp

struct BaselineToppOpts {
  std::string dist_path;
  std::string gold_path;
  std::string labelset = "all18";
  double top_p = 0.9;
  std::string out_dir;
};

void run_baseline_topp(const BaselineToppOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "baseline-topp";
  manifest.resolved_config = {{"labelset", o.labelset}, {"top_p", o.top_p}};
  manifest.add_input("distributions", o.dist_path);
  manifest.add_input("gold", o.gold_path);
  if (!plan(manifest, {o.out_dir + "/report.json"})) return;

  // Distributions: header "id" + 18 code columns, probabilities per row.
  auto lines = read_lines(o.dist_path);
  std::string expected_header = "id";
  for (auto code : kDialectCodes) expected_header += "\t" + std::string(code);
  if (lines.empty() || lines[0] != expected_header) {
    throw DataError(o.dist_path + ": expected header 'id<TAB>" +
                    std::string(kDialectCodes[0]) + "<TAB>...'");
  }
  std::map<std::string, LabelVector> preds_by_id;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_tabs(lines[i]);
    if (f.size() != kNumDialects + 1) {
      throw DataError(o.dist_path + " line " + std::to_string(i + 1) + ": expected 19 fields");
    }
    SingleLabelDistribution dist;
    for (std::size_t j = 0; j < kNumDialects; ++j) {
      dist.probs[j] = parse_double(f[j + 1], "probability");
    }
    preds_by_id[f[0]] = top_p_labels(dist, o.top_p);
  }

  const auto gold = load_labeled(o.gold_path);
  std::vector<LabelVector> preds, golds;
  for (const auto& ls : gold) {
    auto it = preds_by_id.find(ls.sample.id);
    if (it == preds_by_id.end()) {
      throw DataError("no distribution for gold sample '" + ls.sample.id + "'");
    }
    preds.push_back(it->second);
    golds.push_back(ls.labels);
  }
  auto report = evaluate_pairs(preds, golds, parse_labelset(o.labelset));
  atomic_write(std::filesystem::path(o.out_dir) / "report.json", report.to_json().dump(2) + "\n");
  atomic_write(std::filesystem::path(o.out_dir) / "report.tsv", report.to_tsv());
  manifest.write(std::filesystem::path(o.out_dir) / "run_manifest.json");
  std::cout << "top-p baseline macro F1 " << format_double(report.macro.f1) << "\n";
}

// ----------------------------------------------------------------------- report

struct ReportOpts {
  std::string kind;
  std::string records_path;
  std::string profile_path;
  std::string dataset_path;
  std::string kind_label = "cardinality";
  std::string out_dir;
};

void run_report(const ReportOpts& o) {
  RunManifest manifest;
  manifest.subcommand = "report";
  manifest.resolved_config = {{"kind", o.kind}};
  if (!plan(manifest, {o.out_dir})) return;

  if (o.kind == "cartography") {
    std::vector<CartographyRecord> records;
    std::map<std::string, int> golds;
    load_records(o.records_path, records, golds);
    std::vector<CartographyRecord> positives, negatives;
    for (const auto& r : records) {
      (golds.count(r.id) && golds.at(r.id) == 1 ? positives : negatives).push_back(r);
    }
    atomic_write(std::filesystem::path(o.out_dir) / "cartography_positive.svg",
                 cartography_scatter_svg(positives));
    atomic_write(std::filesystem::path(o.out_dir) / "cartography_negative.svg",
                 cartography_scatter_svg(negatives));
    manifest.add_input("records", o.records_path);
  } else if (o.kind == "loss-profile") {
    auto lines = read_lines(o.profile_path);
    if (lines.empty() || lines[0] != "stage\tbucket\tcount\tmean_loss") {
      throw DataError(o.profile_path + ": not a loss profile file");
    }
    std::vector<BucketLossProfile> profile;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto f = split_tabs(lines[i]);
      if (f.size() != 4) throw DataError(o.profile_path + ": malformed row");
      BucketLossProfile p;
      p.label = f[1];
      p.count = static_cast<std::size_t>(parse_double(f[2], "count"));
      p.mean_loss = parse_double(f[3], "mean_loss");
      profile.push_back(std::move(p));
    }
    atomic_write(std::filesystem::path(o.out_dir) / "loss_profile.svg",
                 loss_profile_svg(profile, o.kind_label));
    manifest.add_input("profile", o.profile_path);
  } else if (o.kind == "cardinality-aldi") {
    const auto ds = load_labeled(o.dataset_path);
    const auto stats = cardinality_by_aldi_report(ds);
    atomic_write(std::filesystem::path(o.out_dir) / "cardinality_by_aldi.tsv",
                 cardinality_report_tsv(stats));
    atomic_write(std::filesystem::path(o.out_dir) / "cardinality_by_aldi.svg",
                 cardinality_report_svg(stats));
    manifest.add_input("dataset", o.dataset_path);
  } else {
    throw UsageError("--kind must be cartography, loss-profile, or cardinality-aldi");
  }
  manifest.write(std::filesystem::path(o.out_dir) / "run_manifest.json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mladi: weakly-supervised multi-label dialect identification toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file; sections match subcommands");
  app.add_flag("--dry-run", g_dry_run, "Print the resolved plan without writing outputs");
  app.set_version_flag("--version", std::string(kToolVersion));

  BuildBinaryOpts build_opts;
  auto* build_cmd =
      app.add_subcommand("build-binary", "Build per-dialect binary acceptability datasets");
  build_cmd->add_option("--corpus", build_opts.corpus_path, "Corpus TSV/JSONL")->required();
  build_cmd->add_option("--adjacency", build_opts.adjacency_path, "Adjacency file");
  build_cmd->add_option("--dialect", build_opts.dialect, "Dialect code or 'all'");
  build_cmd->add_option("--mode", build_opts.mode, "cartography | pseudo-label")
      ->check(CLI::IsMember({"cartography", "pseudo-label"}));
  build_cmd->add_option("--source-filter", build_opts.source_filter,
                        "Keep only samples with this source tag");
  build_cmd->add_option("--out", build_opts.out_dir, "Output directory")->required();
  build_cmd->callback([&]() { run_build_binary(build_opts); });

  TrainBinaryOpts train_binary_opts;
  train_binary_opts.train.cfg.epochs = 5;  // cartography default: 5 epochs, 1 warmup
  train_binary_opts.train.cfg.validation_fraction = 0;
  auto* train_binary_cmd =
      app.add_subcommand("train-binary", "Train a binary scorer with trace logging");
  train_binary_cmd->add_option("--dataset", train_binary_opts.dataset_dir, "Binary dataset dir")
      ->required();
  train_binary_cmd->add_option("--out", train_binary_opts.out_dir, "Model output dir")->required();
  train_binary_opts.encoder.add_flags(train_binary_cmd);
  train_binary_opts.train.add_flags(train_binary_cmd, true);
  train_binary_cmd->callback([&]() { run_train_binary(train_binary_opts); });

  CartographyOpts cartography_opts;
  auto* cartography_cmd =
      app.add_subcommand("cartography", "Compute training-dynamics metrics from a trace");
  cartography_cmd->add_option("--trace", cartography_opts.trace_path, "Trace JSONL")->required();
  cartography_cmd->add_option("--out", cartography_opts.out_dir, "Output directory")->required();
  cartography_cmd->callback([&]() { run_cartography(cartography_opts); });

  FlagOpts flag_opts;
  auto* flag_cmd = app.add_subcommand("flag", "List suspect negatives (correctness < 1)");
  flag_cmd->add_option("--records", flag_opts.records_path, "Cartography records TSV")->required();
  flag_cmd->add_option("--out", flag_opts.out_path, "Flagged ids TSV")->required();
  flag_cmd->callback([&]() { run_flag(flag_opts); });

  AnnotateExportOpts annotate_opts;
  auto* annotate_cmd =
      app.add_subcommand("annotate-export", "Export a per-bin annotation sheet");
  annotate_cmd->add_option("--records", annotate_opts.records_path, "Cartography records TSV")
      ->required();
  annotate_cmd->add_option("--corpus", annotate_opts.corpus_path, "Corpus with sample texts")
      ->required();
  annotate_cmd->add_option("--per-bin", annotate_opts.per_bin, "Samples per bin");
  annotate_cmd->add_option("--seed", annotate_opts.seed, "Sampling seed");
  annotate_cmd->add_option("--out", annotate_opts.out_path, "Sheet TSV path")->required();
  annotate_cmd->callback([&]() { run_annotate_export(annotate_opts); });

  PseudoLabelOpts pseudo_opts;
  auto* pseudo_cmd = app.add_subcommand("pseudo-label", "Produce 18-label pseudo-annotations");
  pseudo_cmd->add_option("--corpus", pseudo_opts.corpus_path, "Corpus TSV/JSONL")->required();
  pseudo_cmd->add_option("--out", pseudo_opts.out_path, "Labeled TSV output")->required();
  pseudo_cmd->add_option("--source", pseudo_opts.source, "bin | gpt")
      ->check(CLI::IsMember({"bin", "gpt"}));
  pseudo_cmd->add_option("--bank", pseudo_opts.bank_dir, "Binary classifier bank dir");
  pseudo_cmd->add_option("--bank-threshold", pseudo_opts.bank_threshold,
                         "Bank decision threshold");
  auto* live_flag = pseudo_cmd->add_flag("--live", pseudo_opts.live, "Query a live endpoint");
  pseudo_cmd->add_flag("--replay", pseudo_opts.replay, "Replay recorded responses (default)")
      ->excludes(live_flag);
  pseudo_cmd->add_option("--fixtures", pseudo_opts.fixtures_dir, "Replay fixtures dir");
  pseudo_cmd->add_option("--cache", pseudo_opts.cache_dir, "Response cache dir");
  pseudo_cmd->add_option("--template", pseudo_opts.template_path, "Prompt template file");
  pseudo_cmd->add_option("--retries", pseudo_opts.retries, "Parse-failure retries");
  pseudo_cmd->add_option("--max-inflight", pseudo_opts.max_inflight, "Live-mode concurrency");
  pseudo_cmd->add_option("--endpoint", pseudo_opts.endpoint_url, "Chat endpoint base URL");
  pseudo_cmd->add_option("--model", pseudo_opts.endpoint_model, "Chat model name");
  pseudo_cmd->add_option("--api-key-env", pseudo_opts.api_key_env, "API key env var");
  pseudo_cmd->callback([&]() { run_pseudo_label(pseudo_opts); });

  AggregateOpts aggregate_opts;
  auto* aggregate_cmd =
      app.add_subcommand("aggregate", "Route per-sample vectors by ALDi into a hybrid dataset");
  aggregate_cmd->add_option("--corpus", aggregate_opts.corpus_path, "Corpus TSV/JSONL")
      ->required();
  aggregate_cmd->add_option("--bin", aggregate_opts.bin_path, "Bank-labeled TSV");
  aggregate_cmd->add_option("--gpt", aggregate_opts.gpt_path, "LLM-labeled TSV");
  aggregate_cmd->add_option("--aldi-routing", aggregate_opts.routing, "Routing rule");
  aggregate_cmd->add_option("--out", aggregate_opts.out_path, "Hybrid TSV output")->required();
  aggregate_cmd->callback([&]() { run_aggregate(aggregate_opts); });

  TrainMultilabelOpts train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train the 18-label classifier");
  train_cmd->add_option("--dataset", train_opts.dataset_path, "Labeled TSV")->required();
  train_cmd->add_option("--out", train_opts.out_dir, "Model output dir")->required();
  train_opts.encoder.add_flags(train_cmd);
  train_opts.train.add_flags(train_cmd, false);
  train_cmd->callback([&]() { run_train(train_opts); });

  LossProfileOpts loss_opts;
  auto* loss_cmd =
      app.add_subcommand("loss-profile", "Per-example losses and per-bucket difficulty profile");
  loss_cmd->add_option("--model", loss_opts.model_dir, "Trained multilabel model dir")
      ->required();
  loss_cmd->add_option("--dataset", loss_opts.dataset_path, "Labeled TSV")->required();
  loss_cmd->add_option("--kind", loss_opts.kind, "cardinality | aldi")
      ->check(CLI::IsMember({"cardinality", "aldi"}));
  loss_cmd->add_option("--out", loss_opts.out_dir, "Output directory")->required();
  loss_cmd->callback([&]() { run_loss_profile(loss_opts); });

  ScheduleOpts schedule_opts;
  auto* schedule_cmd = app.add_subcommand("schedule", "Build a curriculum schedule");
  schedule_cmd->add_option("--dataset", schedule_opts.dataset_path, "Labeled TSV")->required();
  schedule_cmd->add_option("--losses", schedule_opts.losses_path, "Per-example losses TSV")
      ->required();
  schedule_cmd->add_option("--kind", schedule_opts.kind, "cardinality | aldi")
      ->check(CLI::IsMember({"cardinality", "aldi"}));
  schedule_cmd->add_option("--seed", schedule_opts.seed, "Replay sampling seed");
  schedule_cmd->add_option("--replay-rule", schedule_opts.replay_rule,
                           "min-prior | fixed-count | fraction")
      ->check(CLI::IsMember({"min-prior", "fixed-count", "fraction"}));
  schedule_cmd->add_option("--replay-count", schedule_opts.replay_count,
                           "Fixed replay count (fixed-count rule)");
  schedule_cmd->add_option("--replay-fraction", schedule_opts.replay_fraction,
                           "Replay fraction of the new bucket (fraction rule)");
  schedule_cmd->add_option("--out", schedule_opts.out_path, "Schedule JSON path")->required();
  schedule_cmd->callback([&]() { run_schedule(schedule_opts); });

  CurriculumTrainOpts curriculum_opts;
  auto* curriculum_cmd =
      app.add_subcommand("curriculum-train", "Train through a curriculum schedule");
  curriculum_cmd->add_option("--dataset", curriculum_opts.dataset_path, "Labeled TSV")
      ->required();
  curriculum_cmd->add_option("--schedule", curriculum_opts.schedule_path, "Schedule JSON")
      ->required();
  curriculum_cmd->add_option("--out", curriculum_opts.out_dir, "Model output dir")->required();
  curriculum_cmd->add_option("--passes", curriculum_opts.passes, "Passes per stage");
  curriculum_opts.encoder.add_flags(curriculum_cmd);
  curriculum_opts.train.add_flags(curriculum_cmd, false);
  curriculum_cmd->callback([&]() { run_curriculum_train(curriculum_opts); });

  EvaluateOpts evaluate_opts;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a model against gold labels");
  evaluate_cmd->add_option("--model", evaluate_opts.model_dir, "Model dir")->required();
  evaluate_cmd->add_option("--gold", evaluate_opts.gold_path, "Gold labeled TSV")->required();
  evaluate_cmd->add_option("--labelset", evaluate_opts.labelset,
                           "all18 | dev8 | CODE,CODE,... | @file");
  evaluate_cmd->add_option("--threshold", evaluate_opts.threshold, "Decision threshold");
  evaluate_cmd->add_option("--out", evaluate_opts.out_dir, "Report output dir")->required();
  evaluate_cmd->callback([&]() { run_evaluate(evaluate_opts); });

  BaselineToppOpts topp_opts;
  auto* topp_cmd = app.add_subcommand(
      "baseline-topp", "Convert single-label distributions via top-p and evaluate");
  topp_cmd->add_option("--distributions", topp_opts.dist_path, "Distribution TSV")->required();
  topp_cmd->add_option("--gold", topp_opts.gold_path, "Gold labeled TSV")->required();
  topp_cmd->add_option("--labelset", topp_opts.labelset, "Label set");
  topp_cmd->add_option("--top-p", topp_opts.top_p, "Cumulative probability mass");
  topp_cmd->add_option("--out", topp_opts.out_dir, "Report output dir")->required();
  topp_cmd->callback([&]() { run_baseline_topp(topp_opts); });

  ReportOpts report_opts;
  auto* report_cmd = app.add_subcommand("report", "Emit figures (SVG) from pipeline artifacts");
  report_cmd->add_option("--kind", report_opts.kind,
                         "cartography | loss-profile | cardinality-aldi")
      ->required();
  report_cmd->add_option("--records", report_opts.records_path, "Cartography records TSV");
  report_cmd->add_option("--profile", report_opts.profile_path, "Loss profile TSV");
  report_cmd->add_option("--dataset", report_opts.dataset_path, "Labeled TSV");
  report_cmd->add_option("--kind-label", report_opts.kind_label, "Bucket kind label for axes");
  report_cmd->add_option("--out", report_opts.out_dir, "Output directory")->required();
  report_cmd->callback([&]() { run_report(report_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ExternalServiceError& e) {
    std::cerr << "external service error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
