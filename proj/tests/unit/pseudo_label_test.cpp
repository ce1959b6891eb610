#include <doctest.h>

#include <nlohmann/json.hpp>
#include <set>

#include "mladi/errors.hpp"
#include "mladi/llm_client.hpp"
#include "mladi/pseudo_label.hpp"
#include "mladi/rng.hpp"
#include "test_util.hpp"

using namespace mladi;
using mladi::test::TempDir;
using mladi::test::make_sample;

namespace {

BinaryClassifierBank constant_bank(double prob, double threshold = 0.5) {
  BinaryClassifierBank bank;
  bank.threshold = threshold;
  for (auto& scorer : bank.scorers) {
    scorer = [prob](const std::string&) { return prob; };
  }
  return bank;
}

// Response text in the prompt's country order, e.g. {"Iraq": 0, ...}.
std::string response_for(const LabelVector& v) {
  std::string out = "{";
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    if (i) out += ", ";
    out += "\"" + std::string(kPromptCountryOrder[i].name()) +
           "\": " + (v.get(kPromptCountryOrder[i]) ? "1" : "0");
  }
  return out + "}";
}

LabelVector random_vector(Rng& rng) {
  LabelVector v;
  for (std::size_t i = 0; i < kNumDialects; ++i) v.set(i, rng.bounded(2) == 1);
  return v;
}

void write_fixture(const std::filesystem::path& dir, const std::string& id,
                   const std::vector<std::string>& responses) {
  nlohmann::json j;
  j["responses"] = responses;
  std::filesystem::create_directories(dir);
  atomic_write(dir / (id + ".json"), j.dump());
}

struct CountingTransport final : ChatTransport {
  explicit CountingTransport(std::string canned) : response(std::move(canned)) {}
  std::string complete(const std::string&) override {
    ++calls;
    return response;
  }
  std::string response;
  int calls = 0;
};

struct FailingTransport final : ChatTransport {
  std::string complete(const std::string&) override {
    throw ExternalServiceError("network touched in a test that forbids it");
  }
};

LlmClientConfig replay_config(const TempDir& tmp) {
  LlmClientConfig cfg;
  cfg.mode = ClientMode::kReplay;
  cfg.fixtures_dir = tmp / "fixtures";
  std::filesystem::create_directories(cfg.fixtures_dir);
  return cfg;
}

}  // namespace

TEST_CASE("binary_vector thresholds each scorer's probability") {
  const auto x = make_sample("x", "text", "EG", 0.5);
  CHECK(binary_vector(x, constant_bank(0.99)) == LabelVector::all_ones());
  CHECK(binary_vector(x, constant_bank(0.01)) == LabelVector{});

  BinaryClassifierBank bank = constant_bank(0.1);
  bank.scorers[DialectLabel::from_code("EG")->index()] = [](const std::string&) { return 0.9; };
  bank.scorers[DialectLabel::from_code("SD")->index()] = [](const std::string&) { return 0.6; };
  auto v = binary_vector(x, bank);
  CHECK(v.cardinality() == 2);
  CHECK(v.get(*DialectLabel::from_code("EG")));
  CHECK(v.get(*DialectLabel::from_code("SD")));
}

TEST_CASE("binary_vector rejects an untrained scorer") {
  auto bank = constant_bank(0.9);
  bank.scorers[3] = nullptr;
  CHECK_THROWS_WITH_AS(binary_vector(make_sample("x", "t", "EG", 0.5), bank),
                       doctest::Contains("no trained scorer"), DataError);
}

TEST_CASE("render_prompt substitutes the sentence and enumerates the countries") {
  const auto prompt =
      render_prompt(make_sample("x", "abc", "EG", 0.5), default_prompt_template());
  CHECK(prompt.find("Input sentence: abc") != std::string::npos);
  // All 18 countries appear, in order from Iraq to Qatar.
  std::size_t last = 0;
  for (auto d : kPromptCountryOrder) {
    const auto pos = prompt.find(d.name(), last);
    REQUIRE(pos != std::string::npos);
    last = pos;
  }
}

TEST_CASE("render_prompt guards its inputs") {
  CHECK_THROWS_AS(render_prompt(make_sample("x", "", "EG", 0.5), default_prompt_template()),
                  DataError);
  CHECK_THROWS_AS(render_prompt(make_sample("x", "abc", "EG", 0.5), "no placeholder"),
                  UsageError);
}

TEST_CASE("parse_llm_response handles well-formed and decorated responses") {
  Rng rng(17);
  const auto v = random_vector(rng);
  CHECK(parse_llm_response(response_for(v)) == v);
  CHECK(parse_llm_response("Sure! Here are my findings:\n```json\n" + response_for(v) +
                           "\n```\nLet me know.") == v);
}

TEST_CASE("parse_llm_response raises distinct error kinds") {
  LabelVector zeros;
  const std::string good = response_for(zeros);

  SUBCASE("missing key") {
    // drop the last entry ("Qatar": x)
    std::string bad = good.substr(0, good.rfind(',')) + "}";
    try {
      parse_llm_response(bad);
      FAIL("expected LlmParseError");
    } catch (const LlmParseError& e) {
      CHECK(e.kind() == LlmParseErrorKind::kMissingKey);
    }
  }
  SUBCASE("non-binary value") {
    std::string bad = good;
    const auto pos = bad.find("\"Egypt\": 0");
    bad.replace(pos, 10, "\"Egypt\": 2");
    try {
      parse_llm_response(bad);
      FAIL("expected LlmParseError");
    } catch (const LlmParseError& e) {
      CHECK(e.kind() == LlmParseErrorKind::kNonBinaryValue);
    }
  }
  SUBCASE("extra key") {
    std::string bad = good.substr(0, good.size() - 1) + ", \"France\": 0}";
    try {
      parse_llm_response(bad);
      FAIL("expected LlmParseError");
    } catch (const LlmParseError& e) {
      CHECK(e.kind() == LlmParseErrorKind::kExtraKey);
    }
  }
  SUBCASE("unparseable") {
    try {
      parse_llm_response("no json here at all");
      FAIL("expected LlmParseError");
    } catch (const LlmParseError& e) {
      CHECK(e.kind() == LlmParseErrorKind::kUnparseableJson);
    }
    try {
      parse_llm_response("{\"Iraq\": ");
      FAIL("expected LlmParseError");
    } catch (const LlmParseError& e) {
      CHECK(e.kind() == LlmParseErrorKind::kUnparseableJson);
    }
  }
}

TEST_CASE("serialize-then-parse is the identity on random vectors") {
  Rng rng(23);
  for (int i = 0; i < 1000; ++i) {
    const auto v = random_vector(rng);
    CHECK(parse_llm_response(response_for(v)) == v);
  }
}

TEST_CASE("replay mode never needs a transport; missing fixtures are explicit") {
  TempDir tmp("replay");
  auto cfg = replay_config(tmp);
  const auto x = make_sample("s1", "some text", "EG", 0.5);
  LabelVector v;
  v.set(*DialectLabel::from_code("EG"), true);
  write_fixture(cfg.fixtures_dir, "s1", {response_for(v)});

  LlmAnnotationClient client(cfg, std::make_unique<FailingTransport>());
  CHECK(gpt_vector(x, client) == v);
  CHECK_THROWS_AS(client.annotate(make_sample("s2", "other", "EG", 0.5)), FixtureMissingError);
}

TEST_CASE("a malformed-then-valid fixture succeeds after exactly one retry") {
  TempDir tmp("retry");
  auto cfg = replay_config(tmp);
  LabelVector v;
  v.set(2, true);
  write_fixture(cfg.fixtures_dir, "s1", {"garbage", response_for(v)});
  LlmAnnotationClient client(cfg);
  auto ann = client.annotate(make_sample("s1", "text", "EG", 0.5));
  CHECK(ann.labels == v);
  CHECK(ann.retries_used == 1);
}

TEST_CASE("retries exhaust into an external-service error") {
  TempDir tmp("exhaust");
  auto cfg = replay_config(tmp);
  cfg.max_retries = 1;
  write_fixture(cfg.fixtures_dir, "s1", {"garbage", "more garbage"});
  LlmAnnotationClient client(cfg);
  CHECK_THROWS_AS(client.annotate(make_sample("s1", "text", "EG", 0.5)), ExternalServiceError);
}

TEST_CASE("cached annotations never re-query the endpoint") {
  TempDir tmp("cache");
  LabelVector v;
  v.set(5, true);

  LlmClientConfig cfg;
  cfg.mode = ClientMode::kLive;
  cfg.cache_dir = tmp / "cache";
  auto transport = std::make_unique<CountingTransport>(response_for(v));
  auto* counter = transport.get();
  LlmAnnotationClient client(cfg, std::move(transport));

  const auto x = make_sample("s1", "text", "EG", 0.5);
  CHECK(client.annotate(x).labels == v);
  CHECK(counter->calls == 1);
  auto second = client.annotate(x);
  CHECK(second.labels == v);
  CHECK(second.from_cache);
  CHECK(counter->calls == 1);  // cache hit, zero endpoint calls
}

TEST_CASE("editing the prompt template invalidates the cache") {
  TempDir tmp("cache_inval");
  LabelVector v;
  v.set(5, true);
  const auto x = make_sample("s1", "text", "EG", 0.5);

  LlmClientConfig cfg;
  cfg.mode = ClientMode::kLive;
  cfg.cache_dir = tmp / "cache";
  {
    LlmAnnotationClient client(cfg, std::make_unique<CountingTransport>(response_for(v)));
    client.annotate(x);
  }
  cfg.prompt_template = default_prompt_template() + "\nBe terse.";
  auto transport = std::make_unique<CountingTransport>(response_for(v));
  auto* counter = transport.get();
  LlmAnnotationClient client(cfg, std::move(transport));
  CHECK_FALSE(client.annotate(x).from_cache);
  CHECK(counter->calls == 1);
}

TEST_CASE("aggregate routes by the ALDi extremes") {
  LabelVector bin, gpt;
  bin.set(0, true);
  gpt.set(1, true);
  CHECK(aggregate(0.05, bin, gpt) == bin);
  CHECK(aggregate(0.5, bin, gpt) == gpt);
  CHECK(aggregate(0.9, bin, gpt) == bin);
}

TEST_CASE("routing totality on a dense grid including the exact boundaries") {
  LabelVector bin, gpt;
  bin.set(0, true);
  gpt.set(1, true);
  for (int i = 0; i <= 900; ++i) {
    const double aldi = static_cast<double>(i) / 900.0;
    const auto source = route_for_aldi(aldi);
    const bool expect_bin = aldi < 1.0 / 9.0 || aldi > 7.0 / 9.0;
    CHECK(source ==
          (expect_bin ? RoutedSource::kBinaryClassifiers : RoutedSource::kGpt));
  }
  CHECK(route_for_aldi(100.0 / 900.0) == RoutedSource::kGpt);  // exactly 1/9
  CHECK(route_for_aldi(700.0 / 900.0) == RoutedSource::kGpt);  // exactly 7/9
}

TEST_CASE("aggregate is idempotent when both sources agree") {
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const auto v = random_vector(rng);
    CHECK(aggregate(rng.uniform(), v, v) == v);
  }
}

TEST_CASE("build_hybrid_dataset routes, drops zero-cardinality, keeps provenance") {
  TempDir tmp("hybrid");
  auto cfg = replay_config(tmp);

  std::vector<Sample> corpus = {
      make_sample("msa", "formal text", "EG", 0.02),     // -> bank (all ones)
      make_sample("mid", "mixed text", "MA", 0.5),       // -> gpt fixture
      make_sample("mid0", "rejected text", "SD", 0.4),   // -> gpt all-zeros, dropped
      make_sample("high", "dialect text", "SY", 0.95),   // -> bank
  };
  LabelVector gpt_mid;
  gpt_mid.set(*DialectLabel::from_code("MA"), true);
  write_fixture(cfg.fixtures_dir, "mid", {response_for(gpt_mid)});
  write_fixture(cfg.fixtures_dir, "mid0", {response_for(LabelVector{})});

  LlmAnnotationClient client(cfg);
  const auto bank = constant_bank(0.9);
  auto result = build_hybrid_dataset(corpus, bank, client);

  CHECK(result.dataset.size() == 3);
  CHECK(result.dropped_zero_cardinality == 1);
  CHECK(result.routed_to_bin == 2);
  CHECK(result.routed_to_gpt == 2);
  CHECK(result.dataset.size() <= corpus.size());

  // The MSA sample keeps the bank's high-cardinality vector.
  CHECK(result.dataset[0].sample.id == "msa");
  CHECK(result.dataset[0].labels.cardinality() == 18);
  CHECK(result.dataset[0].routed_source == "bin");
  CHECK(result.dataset[0].provenance == Provenance::kHybrid);
  CHECK(result.dataset[1].sample.id == "mid");
  CHECK(result.dataset[1].routed_source == "gpt");
  for (const auto& ls : result.dataset) CHECK(ls.labels.cardinality() >= 1);
}

TEST_CASE("cardinality report covers all ALDi intervals") {
  auto labeled = [](const std::string& id, double aldi, std::size_t card) {
    LabeledSample ls;
    ls.sample = make_sample(id, "t", "EG", aldi);
    for (std::size_t i = 0; i < card; ++i) ls.labels.set(i, true);
    return ls;
  };

  SUBCASE("constant cardinality gives constant stats") {
    std::vector<LabeledSample> ds = {labeled("a", 0.0, 1), labeled("b", 0.3, 1),
                                     labeled("c", 0.5, 1), labeled("d", 0.9, 1)};
    auto stats = cardinality_by_aldi_report(ds);
    REQUIRE(stats.size() == 4);
    for (const auto& s : stats) {
      CHECK(s.count == 1);
      CHECK(s.min == 1);
      CHECK(s.median == 1);
      CHECK(s.max == 1);
    }
  }
  SUBCASE("empty buckets are reported with count 0") {
    std::vector<LabeledSample> ds = {labeled("a", 0.0, 2)};
    auto stats = cardinality_by_aldi_report(ds);
    REQUIRE(stats.size() == 4);
    CHECK(stats[0].count == 1);
    CHECK(stats[1].count == 0);
    CHECK(stats[2].count == 0);
    CHECK(stats[3].count == 0);
  }
  SUBCASE("MSA-heavy cardinalities fall as dialectness rises") {
    std::vector<LabeledSample> ds = {labeled("a", 0.01, 17), labeled("b", 0.05, 18),
                                     labeled("c", 0.9, 1), labeled("d", 0.95, 2)};
    auto stats = cardinality_by_aldi_report(ds);
    CHECK(stats[0].median > stats[3].median);
    CHECK(stats[0].min == 17);
    CHECK(stats[3].max == 2);
  }
}
