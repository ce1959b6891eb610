#include <doctest.h>

#include <algorithm>
#include <set>

#include "mladi/curriculum.hpp"
#include "mladi/errors.hpp"
#include "mladi/rng.hpp"
#include "test_util.hpp"

using namespace mladi;
using mladi::test::TempDir;
using mladi::test::make_sample;

namespace {

LabeledSample labeled(const std::string& id, std::size_t card, double aldi = 0.5) {
  LabeledSample ls;
  ls.sample = make_sample(id, "text " + id, "EG", aldi);
  for (std::size_t i = 0; i < card; ++i) ls.labels.set(i, true);
  return ls;
}

// n samples per requested cardinality.
std::vector<LabeledSample> by_cards(const std::vector<std::pair<std::size_t, int>>& shape) {
  std::vector<LabeledSample> ds;
  int k = 0;
  for (const auto& [card, n] : shape) {
    for (int i = 0; i < n; ++i) ds.push_back(labeled("s" + std::to_string(k++), card));
  }
  return ds;
}

}  // namespace

TEST_CASE("cardinality partition groups by observed values") {
  auto ds = by_cards({{1, 2}, {2, 1}, {5, 1}});
  auto spec = partition(ds, BucketKind::kCardinality);
  REQUIRE(spec.buckets.size() == 3);
  CHECK(spec.buckets[0].key == 1);
  CHECK(spec.buckets[0].member_ids.size() == 2);
  CHECK(spec.buckets[1].key == 2);
  CHECK(spec.buckets[1].member_ids.size() == 1);
  CHECK(spec.buckets[2].key == 5);
  CHECK(std::is_sorted(spec.buckets[0].member_ids.begin(), spec.buckets[0].member_ids.end()));
}

TEST_CASE("aldi partition uses the four intervals with left-closed bounds") {
  std::vector<LabeledSample> ds = {labeled("a", 1, 0.0), labeled("b", 1, 0.2),
                                   labeled("c", 1, 0.5), labeled("d", 1, 0.9)};
  auto spec = partition(ds, BucketKind::kAldi);
  REQUIRE(spec.buckets.size() == 4);
  for (const auto& b : spec.buckets) CHECK(b.member_ids.size() == 1);

  SUBCASE("aldi exactly 1/9 goes to the second interval") {
    std::vector<LabeledSample> edge = {labeled("x", 1, 1.0 / 9.0)};
    auto espec = partition(edge, BucketKind::kAldi);
    REQUIRE(espec.buckets.size() == 1);
    CHECK(espec.buckets[0].key == 1);
  }
  SUBCASE("missing aldi is an error") {
    std::vector<LabeledSample> bad = {labeled("x", 1)};
    bad[0].sample.aldi.reset();
    CHECK_THROWS_AS(partition(bad, BucketKind::kAldi), DataError);
  }
  SUBCASE("buckets form an exact partition") {
    Rng rng(61);
    std::vector<LabeledSample> big;
    for (int i = 0; i < 500; ++i) big.push_back(labeled("r" + std::to_string(i), 1, rng.uniform()));
    auto bspec = partition(big, BucketKind::kAldi);
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& b : bspec.buckets) {
      total += b.member_ids.size();
      for (const auto& id : b.member_ids) CHECK(seen.insert(id).second);
    }
    CHECK(total == big.size());
  }
}

TEST_CASE("order_buckets sorts ascending by mean loss with key tie-breaks") {
  auto ds = by_cards({{1, 2}, {2, 2}, {3, 2}});
  auto spec = partition(ds, BucketKind::kCardinality);
  std::map<std::string, double> losses = {{"s0", 0.2}, {"s1", 0.2}, {"s2", 0.5},
                                          {"s3", 0.5}, {"s4", 0.1}, {"s5", 0.1}};
  auto pi = order_buckets(spec, losses);
  REQUIRE(pi.size() == 3);
  CHECK(spec.buckets[pi[0]].key == 3);
  CHECK(spec.buckets[pi[1]].key == 1);
  CHECK(spec.buckets[pi[2]].key == 2);

  SUBCASE("equal means break ties by ascending key") {
    for (auto& [id, loss] : losses) loss = 0.3;
    pi = order_buckets(spec, losses);
    CHECK(spec.buckets[pi[0]].key == 1);
    CHECK(spec.buckets[pi[1]].key == 2);
    CHECK(spec.buckets[pi[2]].key == 3);
  }
  SUBCASE("single bucket is the identity") {
    auto single = by_cards({{2, 4}});
    auto sspec = partition(single, BucketKind::kCardinality);
    std::map<std::string, double> sl;
    for (const auto& ls : single) sl[ls.sample.id] = 0.4;
    CHECK(order_buckets(sspec, sl) == std::vector<std::size_t>{0});
  }
  SUBCASE("missing losses are an error") {
    losses.erase("s3");
    CHECK_THROWS_AS(order_buckets(spec, losses), DataError);
  }
}

TEST_CASE("ordering is invariant under positive affine loss transforms") {
  Rng rng(67);
  auto ds = by_cards({{1, 5}, {2, 7}, {3, 4}, {6, 6}});
  auto spec = partition(ds, BucketKind::kCardinality);
  std::map<std::string, double> losses;
  for (const auto& ls : ds) losses[ls.sample.id] = rng.uniform();
  auto pi = order_buckets(spec, losses);
  std::map<std::string, double> scaled;
  for (const auto& [id, loss] : losses) scaled[id] = 10.0 * loss + 1.0;
  CHECK(order_buckets(spec, scaled) == pi);
}

TEST_CASE("build_schedule composes stages with equal-size no-replacement replay") {
  auto ds = by_cards({{1, 100}, {2, 50}, {3, 30}});
  auto spec = partition(ds, BucketKind::kCardinality);
  const std::vector<std::size_t> pi = {0, 1, 2};
  auto schedule = build_schedule(spec, pi, 7, {});

  REQUIRE(schedule.stages.size() == 3);
  CHECK(schedule.stages[0].new_member_ids.size() == 100);
  CHECK(schedule.stages[0].replay_ids.empty());

  CHECK(schedule.stages[1].new_member_ids.size() == 50);
  REQUIRE(schedule.stages[1].replay_ids.size() == 1);
  CHECK(schedule.stages[1].replay_ids[0].size() == 50);  // min(50, 100)

  CHECK(schedule.stages[2].new_member_ids.size() == 30);
  REQUIRE(schedule.stages[2].replay_ids.size() == 2);
  CHECK(schedule.stages[2].replay_ids[0].size() == 30);  // min(30, min(100, 50))
  CHECK(schedule.stages[2].replay_ids[1].size() == 30);

  SUBCASE("replay draws are without replacement and come from the right bucket") {
    for (const auto& stage : schedule.stages) {
      for (std::size_t p = 0; p < stage.replay_ids.size(); ++p) {
        const auto& list = stage.replay_ids[p];
        std::set<std::string> unique(list.begin(), list.end());
        CHECK(unique.size() == list.size());
        const auto& source = spec.buckets[schedule.pi[p]].member_ids;
        for (const auto& id : list) {
          CHECK(std::find(source.begin(), source.end(), id) != source.end());
        }
      }
    }
  }
  SUBCASE("the same seed reproduces the draws") {
    auto again = build_schedule(spec, pi, 7, {});
    for (std::size_t e = 0; e < schedule.stages.size(); ++e) {
      CHECK(again.stages[e].replay_ids == schedule.stages[e].replay_ids);
    }
    auto other = build_schedule(spec, pi, 8, {});
    CHECK(other.stages[2].replay_ids != schedule.stages[2].replay_ids);
  }
  SUBCASE("every sample is introduced as new exactly once") {
    std::set<std::string> introduced;
    for (const auto& stage : schedule.stages) {
      for (const auto& id : stage.new_member_ids) CHECK(introduced.insert(id).second);
    }
    CHECK(introduced.size() == ds.size());
  }
}

TEST_CASE("alternative replay rules bound the draw sizes") {
  auto ds = by_cards({{1, 40}, {2, 20}});
  auto spec = partition(ds, BucketKind::kCardinality);
  ReplayConfig fixed{ReplayRule::kFixedCount, 5, 1.0};
  auto s1 = build_schedule(spec, {0, 1}, 3, fixed);
  CHECK(s1.stages[1].replay_ids[0].size() == 5);

  ReplayConfig frac{ReplayRule::kFraction, 0, 0.5};
  auto s2 = build_schedule(spec, {0, 1}, 3, frac);
  CHECK(s2.stages[1].replay_ids[0].size() == 10);  // ceil(0.5 * 20)
}

TEST_CASE("schedules round-trip through JSON") {
  TempDir tmp("sched");
  auto ds = by_cards({{1, 10}, {2, 6}});
  auto spec = partition(ds, BucketKind::kCardinality);
  auto schedule = build_schedule(spec, {1, 0}, 11, {});
  save_schedule(schedule, tmp / "schedule.json");
  auto loaded = load_schedule(tmp / "schedule.json");
  CHECK(loaded.kind == schedule.kind);
  CHECK(loaded.seed == schedule.seed);
  CHECK(loaded.pi == schedule.pi);
  REQUIRE(loaded.stages.size() == schedule.stages.size());
  for (std::size_t e = 0; e < loaded.stages.size(); ++e) {
    CHECK(loaded.stages[e].new_member_ids == schedule.stages[e].new_member_ids);
    CHECK(loaded.stages[e].replay_ids == schedule.stages[e].replay_ids);
  }
}

TEST_CASE("build_schedule validates the permutation") {
  auto ds = by_cards({{1, 4}, {2, 4}});
  auto spec = partition(ds, BucketKind::kCardinality);
  CHECK_THROWS_AS(build_schedule(spec, {0}, 1, {}), DataError);
  CHECK_THROWS_AS(build_schedule(spec, {0, 0}, 1, {}), DataError);
  CHECK_THROWS_AS(build_schedule(spec, {0, 5}, 1, {}), DataError);
}

namespace {

std::vector<LabeledSample> marker_dataset(int per_dialect) {
  std::vector<LabeledSample> ds;
  for (std::size_t d = 0; d < kNumDialects; ++d) {
    for (int i = 0; i < per_dialect; ++i) {
      LabeledSample ls;
      ls.sample = make_sample(std::string(kDialectCodes[d]) + std::to_string(i),
                              "tok_" + std::string(kDialectCodes[d]) + " pad" +
                                  std::to_string(i % 3),
                              std::string(kDialectCodes[d]).c_str(),
                              d % 2 == 0 ? 0.5 : 0.9);
      ls.labels.set(d, true);
      ds.push_back(std::move(ls));
    }
  }
  return ds;
}

TrainConfig curriculum_config() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.dropout = 0;
  cfg.learning_rate = 0.1;
  cfg.frozen_bottom_layers = 0;
  cfg.validation_fraction = 0.1;
  return cfg;
}

std::shared_ptr<ReferenceEncoder> curriculum_encoder() {
  ReferenceEncoderConfig cfg;
  cfg.buckets = 1u << 12;
  return std::make_shared<ReferenceEncoder>(cfg);
}

}  // namespace

TEST_CASE("a one-bucket schedule degenerates to plain training") {
  auto ds = marker_dataset(4);
  for (auto& ls : ds) {
    ls.labels = LabelVector{};
    ls.labels.set(0, true);  // single cardinality bucket
  }
  auto spec = partition(ds, BucketKind::kCardinality);
  REQUIRE(spec.buckets.size() == 1);
  auto schedule = build_schedule(spec, {0}, 1, {});
  auto cfg = curriculum_config();
  auto result = run_curriculum(schedule, ds, curriculum_encoder(), cfg, /*passes=*/3);
  REQUIRE(result.log.size() == 1);
  CHECK(result.log[0].new_samples + result.log[0].replay_samples <= ds.size());
  CHECK(result.log[0].replay_samples == 0);
}

TEST_CASE("run_curriculum logs stage compositions and validation scores") {
  auto ds = marker_dataset(5);
  auto spec = partition(ds, BucketKind::kAldi);
  std::map<std::string, double> losses;
  double v = 0;
  for (const auto& ls : ds) losses[ls.sample.id] = (v += 0.001);
  auto pi = order_buckets(spec, losses);
  auto schedule = build_schedule(spec, pi, 5, {});
  auto cfg = curriculum_config();
  auto result = run_curriculum(schedule, ds, curriculum_encoder(), cfg, 2);
  REQUIRE(result.log.size() == spec.buckets.size());
  for (std::size_t e = 0; e < result.log.size(); ++e) {
    CHECK(result.log[e].stage == static_cast<int>(e + 1));
    CHECK(result.log[e].new_samples > 0);
    if (e > 0) CHECK(result.log[e].replay_samples > 0);
  }
  CHECK(result.log.back().val_micro_f1 > 0.5);
}

TEST_CASE("run_curriculum rejects schedules referencing unknown samples") {
  auto ds = marker_dataset(2);
  auto spec = partition(ds, BucketKind::kCardinality);
  auto schedule = build_schedule(spec, {0}, 1, {});
  schedule.stages[0].new_member_ids.push_back("ghost");
  CHECK_THROWS_WITH_AS(run_curriculum(schedule, ds, curriculum_encoder(), curriculum_config()),
                       doctest::Contains("ghost"), DataError);
}

TEST_CASE("loss profile lists buckets in curriculum order") {
  auto ds = by_cards({{1, 3}, {4, 3}});
  auto spec = partition(ds, BucketKind::kCardinality);
  std::map<std::string, double> losses;
  for (const auto& ls : ds) {
    losses[ls.sample.id] = ls.labels.cardinality() == 1 ? 0.9 : 0.1;
  }
  auto profile = loss_profile(spec, losses);
  REQUIRE(profile.size() == 2);
  CHECK(profile[0].key == 4);
  CHECK(profile[0].mean_loss == doctest::Approx(0.1));
  CHECK(profile[1].key == 1);
  const auto tsv = loss_profile_tsv(profile);
  CHECK(tsv.find("card=4") != std::string::npos);
}
