#include "mladi/pseudo_label.hpp"

#include <algorithm>
#include <cmath>

#include "mladi/errors.hpp"
#include "mladi/io.hpp"
#include "mladi/svg.hpp"
#include "mladi/trainer.hpp"

namespace mladi {

BinaryClassifierBank load_bank(const std::filesystem::path& dir, double threshold) {
  BinaryClassifierBank bank;
  bank.threshold = threshold;
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    const auto model_dir = dir / std::string(kDialectCodes[i]);
    if (!std::filesystem::exists(model_dir / "manifest.json")) {
      throw DataError("bank is missing a scorer for " + std::string(kDialectCodes[i]) + " under " +
                      dir.string());
    }
    auto model = std::make_shared<LinearModel>(load_model(model_dir));
    if (model->n_outputs() != 1) {
      throw DataError(model_dir.string() + " is not a binary scorer checkpoint");
    }
    bank.scorers[i] = [model](const std::string& text) { return model->score(text); };
  }
  return bank;
}

LabelVector binary_vector(const Sample& x, const BinaryClassifierBank& bank) {
  LabelVector v;
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    if (!bank.scorers[i]) {
      throw DataError("no trained scorer for " + std::string(kDialectCodes[i]));
    }
    v.set(i, bank.scorers[i](x.text) >= bank.threshold);
  }
  return v;
}

std::string to_string(RoutedSource s) {
  return s == RoutedSource::kBinaryClassifiers ? "bin" : "gpt";
}

RoutedSource route_for_aldi(double aldi) {
  if (!(aldi >= 0.0 && aldi <= 1.0)) throw DataError("aldi outside [0,1]: " + format_double(aldi));
  if (aldi < kMsaThreshold || aldi > kHighDialectnessThreshold) {
    return RoutedSource::kBinaryClassifiers;
  }
  return RoutedSource::kGpt;
}

LabelVector aggregate(double aldi, const LabelVector& bin, const LabelVector& gpt) {
  return route_for_aldi(aldi) == RoutedSource::kBinaryClassifiers ? bin : gpt;
}

HybridBuildResult build_hybrid_dataset(const std::vector<Sample>& corpus,
                                       const BinaryClassifierBank& bank,
                                       LlmAnnotationClient& client) {
  HybridBuildResult result;
  for (const auto& s : corpus) {
    const double aldi = require_aldi(s);
    const RoutedSource source = route_for_aldi(aldi);
    LabelVector labels;
    if (source == RoutedSource::kBinaryClassifiers) {
      labels = binary_vector(s, bank);
      ++result.routed_to_bin;
    } else {
      labels = gpt_vector(s, client);
      ++result.routed_to_gpt;
    }
    if (labels.cardinality() == 0) {
      ++result.dropped_zero_cardinality;
      continue;
    }
    LabeledSample ls;
    ls.sample = s;
    ls.labels = labels;
    ls.provenance = Provenance::kHybrid;
    ls.routed_source = to_string(source);
    result.dataset.push_back(std::move(ls));
  }
  return result;
}

std::vector<LabeledSample> label_with_bank(const std::vector<Sample>& corpus,
                                           const BinaryClassifierBank& bank) {
  std::vector<LabeledSample> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    LabeledSample ls;
    ls.sample = s;
    ls.labels = binary_vector(s, bank);
    ls.provenance = Provenance::kBinaryClassifiers;
    ls.routed_source = "bin";
    out.push_back(std::move(ls));
  }
  return out;
}

std::vector<LabeledSample> label_with_llm(const std::vector<Sample>& corpus,
                                          LlmAnnotationClient& client) {
  auto annotations = client.annotate_batch(corpus);
  std::vector<LabeledSample> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    LabeledSample ls;
    ls.sample = s;
    ls.labels = annotations.at(s.id).labels;
    ls.provenance = Provenance::kGpt;
    ls.routed_source = "gpt";
    out.push_back(std::move(ls));
  }
  return out;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::vector<CardinalityBucketStats> cardinality_by_aldi_report(
    const std::vector<LabeledSample>& dataset) {
  std::array<std::vector<double>, kNumAldiIntervals> cards;
  for (const auto& ls : dataset) {
    const double aldi = require_aldi(ls.sample);
    cards[aldi_interval_index(aldi)].push_back(static_cast<double>(ls.labels.cardinality()));
  }
  std::vector<CardinalityBucketStats> stats;
  for (std::size_t i = 0; i < kNumAldiIntervals; ++i) {
    CardinalityBucketStats s;
    s.interval = kAldiIntervalLabels[i];
    s.count = cards[i].size();
    if (!cards[i].empty()) {
      std::sort(cards[i].begin(), cards[i].end());
      s.min = cards[i].front();
      s.q1 = quantile(cards[i], 0.25);
      s.median = quantile(cards[i], 0.5);
      s.q3 = quantile(cards[i], 0.75);
      s.max = cards[i].back();
    }
    stats.push_back(std::move(s));
  }
  return stats;
}

std::string cardinality_report_tsv(const std::vector<CardinalityBucketStats>& stats) {
  std::string out = "aldi_interval\tcount\tmin\tq1\tmedian\tq3\tmax\n";
  for (const auto& s : stats) {
    out += s.interval;
    out += '\t';
    out += std::to_string(s.count);
    out += '\t';
    out += format_double(s.min);
    out += '\t';
    out += format_double(s.q1);
    out += '\t';
    out += format_double(s.median);
    out += '\t';
    out += format_double(s.q3);
    out += '\t';
    out += format_double(s.max);
    out += '\n';
  }
  return out;
}

std::string cardinality_report_svg(const std::vector<CardinalityBucketStats>& stats) {
  svg::BoxPlotSpec spec;
  spec.title = "Label cardinality by ALDi interval";
  spec.x_label = "ALDi interval";
  spec.y_label = "cardinality";
  spec.y_min = 0;
  spec.y_max = static_cast<double>(kNumDialects);
  for (const auto& s : stats) {
    spec.boxes.push_back({s.interval, s.min, s.q1, s.median, s.q3, s.max, s.count});
  }
  return svg::boxplot(spec);
}

}  // namespace mladi
