#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mladi/labels.hpp"
#include "mladi/rational.hpp"

namespace mladi {

enum class SourceTag { kTrainPool, kDev, kTest, kExternal };

std::string to_string(SourceTag tag);
SourceTag source_tag_from_string(const std::string& s);

// One sentence with an optional geo-location proxy label and an optional
// dialectness (ALDi) score in [0,1].
struct Sample {
  std::string id;
  std::string text;
  std::optional<DialectLabel> geo;
  std::optional<double> aldi;
  SourceTag source = SourceTag::kTrainPool;
};

enum class Provenance { kBinaryClassifiers, kGpt, kHybrid, kGold };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct LabeledSample {
  Sample sample;
  LabelVector labels;
  Provenance provenance = Provenance::kHybrid;
  // For hybrid datasets: which source produced the vector ("bin" / "gpt").
  std::string routed_source;
};

enum class CorpusFormat { kTsv, kJsonl };

CorpusFormat corpus_format_from_string(const std::string& s);
// .jsonl/.json -> jsonl, anything else -> tsv.
CorpusFormat guess_format(const std::filesystem::path& path);

// TSV: header id<TAB>text<TAB>geo<TAB>aldi, empty cell = absent.
// JSONL: one object per line with the same keys (null or omitted = absent).
// Malformed rows are reported with 1-based line numbers; duplicate ids and
// aldi outside [0,1] are errors.
std::vector<Sample> load_corpus(const std::filesystem::path& path, CorpusFormat format);
std::vector<Sample> load_corpus(const std::filesystem::path& path);

std::string serialize_corpus(const std::vector<Sample>& samples, CorpusFormat format);
void save_corpus(const std::vector<Sample>& samples, const std::filesystem::path& path,
                 CorpusFormat format);

// Labeled datasets (pseudo-labeled / gold) as TSV:
// id text geo aldi labels provenance source
std::vector<LabeledSample> load_labeled(const std::filesystem::path& path);
std::string serialize_labeled(const std::vector<LabeledSample>& ds);
void save_labeled(const std::vector<LabeledSample>& ds, const std::filesystem::path& path);

double require_aldi(const Sample& s);

// aldi < 1/9: no real dialect evidence. Throws DataError when aldi is absent.
bool is_msa(const Sample& s);
bool is_msa(double aldi);

// aldi > 7/9: strong dialect evidence. Throws DataError when aldi is absent.
bool is_highly_dialectal(const Sample& s);
bool is_highly_dialectal(double aldi);

std::size_t label_cardinality(const LabelVector& v);

// Contiguous ALDi intervals shared by the curriculum and the dataset
// diagnostics: [0,1/9), [1/9,0.44), [0.44,7/9), [7/9,1].
inline constexpr std::size_t kNumAldiIntervals = 4;
extern const std::array<std::string, kNumAldiIntervals> kAldiIntervalLabels;
std::size_t aldi_interval_index(double aldi);

struct FilterResult {
  std::vector<LabeledSample> kept;
  std::size_t dropped = 0;
};

// Drop samples whose pseudo-label vector activates no dialect; keeping them
// would mark the sentence negative for all 18 dialects.
FilterResult filter_zero_cardinality(const std::vector<LabeledSample>& ds);

}  // namespace mladi
