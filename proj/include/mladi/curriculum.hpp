#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mladi/corpus.hpp"
#include "mladi/trainer.hpp"

namespace mladi {

enum class BucketKind { kCardinality, kAldi };

std::string to_string(BucketKind k);
BucketKind bucket_kind_from_string(const std::string& s);

struct Bucket {
  int key = 0;  // cardinality value, or ALDi interval index
  std::string label;
  std::vector<std::string> member_ids;  // sorted
};

struct BucketSpec {
  BucketKind kind = BucketKind::kCardinality;
  std::vector<Bucket> buckets;  // ascending key; empty buckets are dropped
};

// Exact partition of ds: cardinality buckets (one per observed value) or the
// four ALDi intervals. Membership lists are sorted by id.
BucketSpec partition(const std::vector<LabeledSample>& ds, BucketKind kind);

// Ascending mean member loss, ties broken by ascending bucket key. Returns
// indices into spec.buckets.
std::vector<std::size_t> order_buckets(const BucketSpec& spec,
                                       const std::map<std::string, double>& losses);

enum class ReplayRule { kMinPrior, kFixedCount, kFraction };

std::string to_string(ReplayRule r);
ReplayRule replay_rule_from_string(const std::string& s);

struct ReplayConfig {
  ReplayRule rule = ReplayRule::kMinPrior;
  std::size_t fixed_count = 0;  // kFixedCount
  double fraction = 1.0;        // kFraction: of the new bucket's size
};

struct CurriculumStage {
  int index = 0;                  // 1-based
  std::size_t new_bucket = 0;     // index into BucketSpec::buckets
  std::string new_bucket_label;
  std::vector<std::string> new_member_ids;
  // One replay list per previously introduced bucket, in introduction order;
  // lists within a stage are equal-sized, drawn without replacement.
  std::vector<std::vector<std::string>> replay_ids;
};

struct CurriculumSchedule {
  BucketKind kind = BucketKind::kCardinality;
  std::uint64_t seed = 0;
  ReplayConfig replay;
  std::vector<std::size_t> pi;  // bucket introduction order
  std::vector<CurriculumStage> stages;

  nlohmann::json to_json() const;
  static CurriculumSchedule from_json(const nlohmann::json& j);
};

CurriculumSchedule build_schedule(const BucketSpec& spec, const std::vector<std::size_t>& pi,
                                  std::uint64_t seed, const ReplayConfig& replay);

void save_schedule(const CurriculumSchedule& schedule, const std::filesystem::path& path);
CurriculumSchedule load_schedule(const std::filesystem::path& path);

struct StageStats {
  int stage = 0;
  std::size_t new_samples = 0;
  std::size_t replay_samples = 0;
  double mean_train_loss = 0;
  double val_micro_f1 = 0;
};

struct CurriculumRunResult {
  LinearModel model;
  std::vector<StageStats> log;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

// Sequential stage training continuing from the previous stage's weights.
// The dataset is split train/validation exactly like train_multilabel; stage
// member lists are restricted to the training side and validation micro F1 is
// logged per stage.
CurriculumRunResult run_curriculum(const CurriculumSchedule& schedule,
                                   const std::vector<LabeledSample>& ds,
                                   std::shared_ptr<Encoder> enc, const TrainConfig& cfg,
                                   int passes_per_stage = 1);

// Sorted mean loss per bucket (the difficulty profile driving the ordering).
struct BucketLossProfile {
  std::string label;
  int key = 0;
  std::size_t count = 0;
  double mean_loss = 0;
};

std::vector<BucketLossProfile> loss_profile(const BucketSpec& spec,
                                            const std::map<std::string, double>& losses);
std::string loss_profile_tsv(const std::vector<BucketLossProfile>& profile);
std::string loss_profile_svg(const std::vector<BucketLossProfile>& profile,
                             const std::string& kind_label);

}  // namespace mladi
