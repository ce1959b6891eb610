#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "mladi/corpus.hpp"
#include "mladi/labels.hpp"
#include "mladi/trainer.hpp"

namespace mladi {

// Subset of the 18 labels an evaluation set was annotated for, kept in
// canonical order. Accepts "all18", "dev8", a comma list of codes, or
// "@path" to a file with one code per line.
std::vector<DialectLabel> parse_labelset(const std::string& spec);

struct RestrictedPairs {
  std::vector<DialectLabel> labelset;
  // n_samples x labelset.size(), 0/1
  std::vector<std::vector<int>> preds;
  std::vector<std::vector<int>> golds;
};

RestrictedPairs restrict_labels(const std::vector<LabelVector>& preds,
                                const std::vector<LabelVector>& golds,
                                const std::vector<DialectLabel>& labelset);

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct PerLabelMetrics {
  std::string code;
  ConfusionCounts counts;
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;  // gold positives
};

struct MacroMetrics {
  double precision = 0, recall = 0, f1 = 0;
  std::vector<PerLabelMetrics> per_label;
};

// Per-label P/R/F1 from binary confusion counts; zero divisions yield 0;
// macro = unweighted mean over the evaluated label set.
MacroMetrics macro_prf(const RestrictedPairs& pairs);

// Hamming accuracy: fraction of (sample, label) cells where pred == gold.
double accuracy(const RestrictedPairs& pairs);

// Single-label softmax distribution over the 18 dialects.
struct SingleLabelDistribution {
  std::array<double, kNumDialects> probs{};
  void validate() const;  // non-negative, sums to 1 within 1e-9
};

// Smallest descending-probability prefix reaching cumulative mass >= p; ties
// broken by canonical label order. p must be in (0,1].
LabelVector top_p_labels(const SingleLabelDistribution& dist, double p = 0.9);

struct PredictionCountRow {
  std::string code;
  std::size_t count = 0;
};

struct PredictionCountGroup {
  std::string group;
  std::size_t group_size = 0;
  std::vector<PredictionCountRow> rows;  // sorted descending by count
};

std::vector<PredictionCountGroup> prediction_count_report(
    const LinearModel& model,
    const std::vector<std::pair<std::string, std::vector<Sample>>>& corpora,
    double threshold = 0.3);

std::string prediction_counts_tsv(const std::vector<PredictionCountGroup>& groups);

struct EvalReport {
  MacroMetrics macro;
  double hamming_accuracy = 0;
  std::vector<std::string> labelset_codes;
  std::size_t n_samples = 0;
  double threshold = 0.3;
  // The benchmark's accuracy definition is not pinned down anywhere public;
  // this report always states the one it uses.
  std::string accuracy_definition = "hamming (cell-wise)";

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string to_tsv() const;
};

EvalReport evaluate_pairs(const std::vector<LabelVector>& preds,
                          const std::vector<LabelVector>& golds,
                          const std::vector<DialectLabel>& labelset);

// Predictions at the threshold, restricted to the label set, all metrics.
EvalReport evaluate_run(const LinearModel& model, const std::vector<LabeledSample>& evalset,
                        const std::vector<DialectLabel>& labelset, double threshold = 0.3);

}  // namespace mladi
