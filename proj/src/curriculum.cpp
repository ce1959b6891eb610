#include "mladi/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "mladi/errors.hpp"
#include "mladi/io.hpp"
#include "mladi/rng.hpp"
#include "mladi/svg.hpp"

namespace mladi {

using nlohmann::json;

std::string to_string(BucketKind k) {
  return k == BucketKind::kCardinality ? "cardinality" : "aldi";
}

BucketKind bucket_kind_from_string(const std::string& s) {
  if (s == "cardinality") return BucketKind::kCardinality;
  if (s == "aldi") return BucketKind::kAldi;
  throw DataError("unknown bucket kind: '" + s + "' (expected cardinality or aldi)");
}

std::string to_string(ReplayRule r) {
  switch (r) {
    case ReplayRule::kMinPrior: return "min-prior";
    case ReplayRule::kFixedCount: return "fixed-count";
    case ReplayRule::kFraction: return "fraction";
  }
  return "min-prior";
}

ReplayRule replay_rule_from_string(const std::string& s) {
  if (s == "min-prior") return ReplayRule::kMinPrior;
  if (s == "fixed-count") return ReplayRule::kFixedCount;
  if (s == "fraction") return ReplayRule::kFraction;
  throw DataError("unknown replay rule: '" + s + "'");
}

BucketSpec partition(const std::vector<LabeledSample>& ds, BucketKind kind) {
  if (ds.empty()) throw DataError("cannot partition an empty dataset");
  BucketSpec spec;
  spec.kind = kind;
  std::map<int, std::vector<std::string>> groups;
  for (const auto& ls : ds) {
    int key;
    if (kind == BucketKind::kCardinality) {
      key = static_cast<int>(ls.labels.cardinality());
    } else {
      key = static_cast<int>(aldi_interval_index(require_aldi(ls.sample)));
    }
    groups[key].push_back(ls.sample.id);
  }
  for (auto& [key, ids] : groups) {
    std::sort(ids.begin(), ids.end());
    Bucket b;
    b.key = key;
    b.label = kind == BucketKind::kCardinality
                  ? "card=" + std::to_string(key)
                  : kAldiIntervalLabels[static_cast<std::size_t>(key)];
    b.member_ids = std::move(ids);
    spec.buckets.push_back(std::move(b));
  }
  return spec;
}

std::vector<std::size_t> order_buckets(const BucketSpec& spec,
                                       const std::map<std::string, double>& losses) {
  std::vector<std::pair<double, std::size_t>> mean_loss;
  for (std::size_t i = 0; i < spec.buckets.size(); ++i) {
    const auto& b = spec.buckets[i];
    double sum = 0;
    for (const auto& id : b.member_ids) {
      auto it = losses.find(id);
      if (it == losses.end()) throw DataError("no loss recorded for sample '" + id + "'");
      sum += it->second;
    }
    mean_loss.emplace_back(sum / static_cast<double>(b.member_ids.size()), i);
  }
  std::sort(mean_loss.begin(), mean_loss.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return spec.buckets[a.second].key < spec.buckets[b.second].key;
  });
  std::vector<std::size_t> pi;
  pi.reserve(mean_loss.size());
  for (const auto& [loss, idx] : mean_loss) pi.push_back(idx);
  return pi;
}

CurriculumSchedule build_schedule(const BucketSpec& spec, const std::vector<std::size_t>& pi,
                                  std::uint64_t seed, const ReplayConfig& replay) {
  if (pi.size() != spec.buckets.size()) {
    throw DataError("ordering must be a permutation of the buckets");
  }
  std::vector<bool> seen(spec.buckets.size(), false);
  for (std::size_t idx : pi) {
    if (idx >= spec.buckets.size() || seen[idx]) {
      throw DataError("ordering must be a permutation of the buckets");
    }
    seen[idx] = true;
  }

  CurriculumSchedule schedule;
  schedule.kind = spec.kind;
  schedule.seed = seed;
  schedule.replay = replay;
  schedule.pi = pi;

  for (std::size_t e = 0; e < pi.size(); ++e) {
    const Bucket& current = spec.buckets[pi[e]];
    CurriculumStage stage;
    stage.index = static_cast<int>(e + 1);
    stage.new_bucket = pi[e];
    stage.new_bucket_label = current.label;
    stage.new_member_ids = current.member_ids;

    if (e > 0) {
      std::size_t smallest_prior = spec.buckets[pi[0]].member_ids.size();
      for (std::size_t p = 1; p < e; ++p) {
        smallest_prior = std::min(smallest_prior, spec.buckets[pi[p]].member_ids.size());
      }
      std::size_t r = 0;
      switch (replay.rule) {
        case ReplayRule::kMinPrior:
          r = std::min(current.member_ids.size(), smallest_prior);
          break;
        case ReplayRule::kFixedCount:
          r = std::min(replay.fixed_count, smallest_prior);
          break;
        case ReplayRule::kFraction:
          r = std::min(static_cast<std::size_t>(std::ceil(
                           replay.fraction * static_cast<double>(current.member_ids.size()))),
                       smallest_prior);
          break;
      }
      for (std::size_t p = 0; p < e; ++p) {
        const Bucket& prior = spec.buckets[pi[p]];
        Rng rng = Rng::derive(seed, e, p);
        auto drawn = rng.sample_without_replacement(prior.member_ids, r);
        std::sort(drawn.begin(), drawn.end());
        stage.replay_ids.push_back(std::move(drawn));
      }
    }
    schedule.stages.push_back(std::move(stage));
  }
  return schedule;
}

json CurriculumSchedule::to_json() const {
  json j;
  j["kind"] = mladi::to_string(kind);
  j["seed"] = seed;
  j["replay"] = {{"rule", mladi::to_string(replay.rule)},
                 {"fixed_count", replay.fixed_count},
                 {"fraction", replay.fraction}};
  j["pi"] = pi;
  j["stages"] = json::array();
  for (const auto& stage : stages) {
    json s;
    s["stage"] = stage.index;
    s["new_bucket"] = stage.new_bucket;
    s["new_bucket_label"] = stage.new_bucket_label;
    s["new_member_ids"] = stage.new_member_ids;
    s["replay_ids"] = stage.replay_ids;
    j["stages"].push_back(std::move(s));
  }
  return j;
}

CurriculumSchedule CurriculumSchedule::from_json(const json& j) {
  CurriculumSchedule schedule;
  schedule.kind = bucket_kind_from_string(j.at("kind").get<std::string>());
  schedule.seed = j.at("seed").get<std::uint64_t>();
  schedule.replay.rule = replay_rule_from_string(j.at("replay").at("rule").get<std::string>());
  schedule.replay.fixed_count = j.at("replay").at("fixed_count").get<std::size_t>();
  schedule.replay.fraction = j.at("replay").at("fraction").get<double>();
  schedule.pi = j.at("pi").get<std::vector<std::size_t>>();
  for (const auto& s : j.at("stages")) {
    CurriculumStage stage;
    stage.index = s.at("stage").get<int>();
    stage.new_bucket = s.at("new_bucket").get<std::size_t>();
    stage.new_bucket_label = s.at("new_bucket_label").get<std::string>();
    stage.new_member_ids = s.at("new_member_ids").get<std::vector<std::string>>();
    stage.replay_ids = s.at("replay_ids").get<std::vector<std::vector<std::string>>>();
    schedule.stages.push_back(std::move(stage));
  }
  return schedule;
}

void save_schedule(const CurriculumSchedule& schedule, const std::filesystem::path& path) {
  atomic_write(path, schedule.to_json().dump(2) + "\n");
}

CurriculumSchedule load_schedule(const std::filesystem::path& path) {
  return CurriculumSchedule::from_json(json::parse(read_file(path)));
}

CurriculumRunResult run_curriculum(const CurriculumSchedule& schedule,
                                   const std::vector<LabeledSample>& ds,
                                   std::shared_ptr<Encoder> enc, const TrainConfig& cfg,
                                   int passes_per_stage) {
  cfg.validate();
  if (passes_per_stage < 1) throw DataError("passes_per_stage must be >= 1");

  std::unordered_map<std::string, const LabeledSample*> by_id;
  for (const auto& ls : ds) by_id[ls.sample.id] = &ls;
  for (const auto& stage : schedule.stages) {
    for (const auto& id : stage.new_member_ids) {
      if (!by_id.count(id)) {
        throw DataError("schedule references sample '" + id + "' absent from the dataset");
      }
    }
  }

  enc->freeze_bottom(cfg.frozen_bottom_layers);

  CurriculumRunResult result;
  result.model = LinearModel(enc, kNumDialects);

  auto [train_ids, val_ids] = split_ids(ds, cfg.validation_fraction, cfg.split_seed);
  result.train_ids = train_ids;
  result.val_ids = val_ids;
  std::unordered_set<std::string> train_set(train_ids.begin(), train_ids.end());

  std::vector<LabeledSample> val_samples;
  for (const auto& id : val_ids) val_samples.push_back(*by_id.at(id));

  // Encode each training sample once; stages reference items from this pool.
  std::unordered_map<std::string, detail::TrainItem> pool;
  auto item_for = [&](const std::string& id) -> detail::TrainItem* {
    if (!train_set.count(id)) return nullptr;  // held out for validation
    auto it = pool.find(id);
    if (it == pool.end()) {
      const LabeledSample& ls = *by_id.at(id);
      detail::TrainItem item;
      item.id = id;
      item.features = enc->encode(ls.sample.text);
      item.targets.resize(kNumDialects);
      for (std::size_t j = 0; j < kNumDialects; ++j) {
        item.targets[j] = ls.labels.get(j) ? 1.0 : 0.0;
      }
      it = pool.emplace(id, std::move(item)).first;
    }
    return &it->second;
  };

  detail::Trainer trainer(result.model, cfg);
  Rng rng(cfg.shuffle_seed);
  for (const auto& stage : schedule.stages) {
    std::vector<detail::TrainItem*> items;
    std::size_t new_count = 0, replay_count = 0;
    for (const auto& id : stage.new_member_ids) {
      if (auto* item = item_for(id)) {
        items.push_back(item);
        ++new_count;
      }
    }
    for (const auto& list : stage.replay_ids) {
      for (const auto& id : list) {
        if (auto* item = item_for(id)) {
          items.push_back(item);
          ++replay_count;
        }
      }
    }
    double loss = 0;
    for (int pass = 0; pass < passes_per_stage; ++pass) {
      loss = trainer.run_epoch(items, rng);
    }
    StageStats stats;
    stats.stage = stage.index;
    stats.new_samples = new_count;
    stats.replay_samples = replay_count;
    stats.mean_train_loss = loss;
    stats.val_micro_f1 =
        val_samples.empty() ? 0.0
                            : micro_f1(result.model, val_samples, cfg.inference_threshold);
    result.log.push_back(stats);
  }
  return result;
}

std::vector<BucketLossProfile> loss_profile(const BucketSpec& spec,
                                            const std::map<std::string, double>& losses) {
  std::vector<BucketLossProfile> profile;
  auto pi = order_buckets(spec, losses);
  for (std::size_t idx : pi) {
    const auto& b = spec.buckets[idx];
    double sum = 0;
    for (const auto& id : b.member_ids) sum += losses.at(id);
    BucketLossProfile p;
    p.label = b.label;
    p.key = b.key;
    p.count = b.member_ids.size();
    p.mean_loss = sum / static_cast<double>(b.member_ids.size());
    profile.push_back(std::move(p));
  }
  return profile;
}

std::string loss_profile_tsv(const std::vector<BucketLossProfile>& profile) {
  std::string out = "stage\tbucket\tcount\tmean_loss\n";
  for (std::size_t i = 0; i < profile.size(); ++i) {
    out += std::to_string(i + 1);
    out += '\t';
    out += profile[i].label;
    out += '\t';
    out += std::to_string(profile[i].count);
    out += '\t';
    out += format_double(profile[i].mean_loss);
    out += '\n';
  }
  return out;
}

std::string loss_profile_svg(const std::vector<BucketLossProfile>& profile,
                             const std::string& kind_label) {
  svg::BarSpec spec;
  spec.title = "Sorted mean loss per " + kind_label + " bucket";
  spec.x_label = kind_label + " bucket (curriculum order)";
  spec.y_label = "mean loss";
  for (const auto& p : profile) {
    spec.labels.push_back(p.label);
    spec.values.push_back(p.mean_loss);
  }
  return svg::bars(spec);
}

}  // namespace mladi
