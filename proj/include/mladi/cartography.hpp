#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mladi/corpus.hpp"

namespace mladi {

// Gold-label probabilities logged for every sample at a fixed step cadence
// while a binary acceptability classifier trains.
struct TraceEntry {
  std::string id;
  int gold = 0;  // 1 = positive (acceptable), 0 = negative
  std::vector<double> probs;
};

struct TrainingTrace {
  int cadence_steps = 300;
  int epochs = 5;
  int warmup_epochs_ignored = 1;
  int checkpoints_per_epoch = 0;
  std::vector<TraceEntry> entries;

  // Probability lists must all have length checkpoints_per_epoch * epochs,
  // with every probability in [0,1].
  void validate() const;
};

// JSONL: header object {cadence_steps, epochs, warmup_epochs_ignored,
// checkpoints_per_epoch} followed by one {id, gold, probs:[...]} per sample.
TrainingTrace load_trace(const std::filesystem::path& path);
std::string serialize_trace(const TrainingTrace& trace);
void save_trace(const TrainingTrace& trace, const std::filesystem::path& path);

struct CartographyRecord {
  std::string id;
  double confidence = 0;   // mean post-warmup gold probability
  double variability = 0;  // population std of the same
  double correctness = 0;  // fraction of post-warmup checkpoints with p(gold) > 0.5
  int bin = 0;             // 0..6, see bin_by_correctness
};

// Drops the first warmup_epochs_ignored epochs' checkpoints, then computes
// confidence / variability / correctness per sample. A checkpoint with
// p(gold) = 0.5 exactly counts as incorrect. Records are returned in id order.
std::vector<CartographyRecord> compute_metrics(const TrainingTrace& trace);

// Correctness bins, in order: {0}, (0,0.2), [0.2,0.4), [0.4,0.6), [0.6,0.8),
// [0.8,1), {1}. Half-open on the right for all five interior bins.
int bin_by_correctness(double correctness);
extern const std::array<std::string, 7> kCorrectnessBinLabels;

// Negative samples the classifier never fully fit: candidates for manual
// re-assignment to the positive class. Sorted ascending by correctness
// (ties by id).
std::vector<std::string> flag_suspect_negatives(const std::vector<CartographyRecord>& records,
                                                const std::map<std::string, int>& golds);

inline constexpr char kAnnotationQuestion[] =
    "Is it possible that the tweet is authored by someone who speaks one of "
    "your country's dialects?";
inline constexpr char kAnnotationOptions[] = "Yes | Not Sure/Maybe | No";

struct AnnotationSheetConfig {
  std::size_t per_bin = 10;
  std::uint64_t seed = 0;
};

// Per polarity (positive non-MSA / negative) and per correctness bin, draws
// min(per_bin, bin size) samples without replacement. MSA positives
// (aldi < 1/9) are excluded from the positive pool. Returns TSV text with the
// annotation question embedded per row.
std::string export_annotation_sheet(const std::vector<CartographyRecord>& records,
                                    const std::map<std::string, int>& golds,
                                    const std::vector<Sample>& corpus,
                                    const AnnotationSheetConfig& cfg);

// Figure-style scatter: variability (x) vs confidence (y), coloured by
// correctness bin. SVG text.
std::string cartography_scatter_svg(const std::vector<CartographyRecord>& records);

// records TSV round-trip (id, gold, confidence, variability, correctness, bin).
std::string serialize_records(const std::vector<CartographyRecord>& records,
                              const std::map<std::string, int>& golds);
void load_records(const std::filesystem::path& path, std::vector<CartographyRecord>& records,
                  std::map<std::string, int>& golds);

}  // namespace mladi
