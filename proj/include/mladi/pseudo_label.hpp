#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mladi/corpus.hpp"
#include "mladi/labels.hpp"
#include "mladi/llm_client.hpp"

namespace mladi {

// One trained acceptability scorer per dialect plus the shared decision
// threshold used to binarize the 18 probabilities.
struct BinaryClassifierBank {
  std::array<std::function<double(const std::string&)>, kNumDialects> scorers;
  double threshold = 0.5;
};

// Loads 18 per-dialect model checkpoints from <dir>/<CODE>/.
BinaryClassifierBank load_bank(const std::filesystem::path& dir, double threshold = 0.5);

// bit = 1 iff scorer probability >= bank threshold.
LabelVector binary_vector(const Sample& x, const BinaryClassifierBank& bank);

enum class RoutedSource { kBinaryClassifiers, kGpt };

std::string to_string(RoutedSource s);

// Binary classifiers at the ALDi extremes (aldi < 1/9 or aldi > 7/9), the
// LLM annotator in the closed mid-range [1/9, 7/9].
RoutedSource route_for_aldi(double aldi);

LabelVector aggregate(double aldi, const LabelVector& bin, const LabelVector& gpt);

struct HybridBuildResult {
  std::vector<LabeledSample> dataset;
  std::size_t dropped_zero_cardinality = 0;
  std::size_t routed_to_bin = 0;
  std::size_t routed_to_gpt = 0;
};

// Routes every sample, computing only the selected source, and drops
// zero-cardinality results. Provenance is "hybrid" with the routing recorded
// per sample.
HybridBuildResult build_hybrid_dataset(const std::vector<Sample>& corpus,
                                       const BinaryClassifierBank& bank,
                                       LlmAnnotationClient& client);

// Pseudo-label vectors from a single source, keeping zero-cardinality entries
// (callers filter later).
std::vector<LabeledSample> label_with_bank(const std::vector<Sample>& corpus,
                                           const BinaryClassifierBank& bank);
std::vector<LabeledSample> label_with_llm(const std::vector<Sample>& corpus,
                                          LlmAnnotationClient& client);

struct CardinalityBucketStats {
  std::string interval;
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Cardinality distribution per ALDi interval ([0,1/9), [1/9,0.44),
// [0.44,7/9), [7/9,1]); empty buckets are reported with count 0.
std::vector<CardinalityBucketStats> cardinality_by_aldi_report(
    const std::vector<LabeledSample>& dataset);

std::string cardinality_report_tsv(const std::vector<CardinalityBucketStats>& stats);
std::string cardinality_report_svg(const std::vector<CardinalityBucketStats>& stats);

}  // namespace mladi
