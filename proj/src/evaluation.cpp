#include "mladi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mladi/errors.hpp"
#include "mladi/io.hpp"

namespace mladi {

using nlohmann::json;

std::vector<DialectLabel> parse_labelset(const std::string& spec) {
  std::vector<std::string> codes;
  if (spec.empty() || spec == "all18") {
    for (auto code : kDialectCodes) codes.emplace_back(code);
  } else if (spec == "dev8") {
    codes = {"DZ", "EG", "JO", "PS", "SD", "SY", "TN", "YE"};
  } else if (spec.front() == '@') {
    for (auto& line : read_lines(spec.substr(1))) {
      if (!line.empty() && line[0] != '#') codes.push_back(line);
    }
  } else {
    std::size_t start = 0;
    while (start <= spec.size()) {
      auto comma = spec.find(',', start);
      std::string tok =
          comma == std::string::npos ? spec.substr(start) : spec.substr(start, comma - start);
      if (!tok.empty()) codes.push_back(tok);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  if (codes.empty()) throw DataError("label set is empty");

  std::vector<DialectLabel> labels;
  for (const auto& code : codes) {
    auto d = DialectLabel::from_code(code);
    if (!d) throw DataError("unknown dialect code in label set: '" + code + "'");
    labels.push_back(*d);
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end(),
                           [](DialectLabel a, DialectLabel b) { return a == b; }),
               labels.end());
  return labels;
}

RestrictedPairs restrict_labels(const std::vector<LabelVector>& preds,
                                const std::vector<LabelVector>& golds,
                                const std::vector<DialectLabel>& labelset) {
  if (preds.size() != golds.size()) {
    throw DataError("prediction/gold count mismatch: " + std::to_string(preds.size()) + " vs " +
                    std::to_string(golds.size()));
  }
  if (labelset.empty()) throw DataError("label set is empty");
  RestrictedPairs out;
  out.labelset = labelset;
  out.preds.reserve(preds.size());
  out.golds.reserve(golds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::vector<int> p(labelset.size()), g(labelset.size());
    for (std::size_t j = 0; j < labelset.size(); ++j) {
      p[j] = preds[i].get(labelset[j]) ? 1 : 0;
      g[j] = golds[i].get(labelset[j]) ? 1 : 0;
    }
    out.preds.push_back(std::move(p));
    out.golds.push_back(std::move(g));
  }
  return out;
}

MacroMetrics macro_prf(const RestrictedPairs& pairs) {
  MacroMetrics m;
  const std::size_t n_labels = pairs.labelset.size();
  for (std::size_t j = 0; j < n_labels; ++j) {
    PerLabelMetrics pl;
    pl.code = pairs.labelset[j].code();
    for (std::size_t i = 0; i < pairs.preds.size(); ++i) {
      const int p = pairs.preds[i][j];
      const int g = pairs.golds[i][j];
      if (p && g) ++pl.counts.tp;
      else if (p && !g) ++pl.counts.fp;
      else if (!p && g) ++pl.counts.fn;
      else ++pl.counts.tn;
    }
    pl.support = pl.counts.tp + pl.counts.fn;
    const auto tp = static_cast<double>(pl.counts.tp);
    pl.precision = pl.counts.tp + pl.counts.fp == 0
                       ? 0.0
                       : tp / static_cast<double>(pl.counts.tp + pl.counts.fp);
    pl.recall = pl.support == 0 ? 0.0 : tp / static_cast<double>(pl.support);
    pl.f1 = pl.precision + pl.recall == 0
                ? 0.0
                : 2.0 * pl.precision * pl.recall / (pl.precision + pl.recall);
    m.precision += pl.precision;
    m.recall += pl.recall;
    m.f1 += pl.f1;
    m.per_label.push_back(std::move(pl));
  }
  const auto denom = static_cast<double>(n_labels);
  m.precision /= denom;
  m.recall /= denom;
  m.f1 /= denom;
  return m;
}

double accuracy(const RestrictedPairs& pairs) {
  if (pairs.preds.empty()) return 0.0;
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < pairs.preds.size(); ++i) {
    for (std::size_t j = 0; j < pairs.labelset.size(); ++j) {
      if (pairs.preds[i][j] == pairs.golds[i][j]) ++correct;
      ++total;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

void SingleLabelDistribution::validate() const {
  double sum = 0;
  for (double p : probs) {
    if (p < 0) throw DataError("distribution has a negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DataError("distribution sums to " + format_double(sum) + ", expected 1");
  }
}

LabelVector top_p_labels(const SingleLabelDistribution& dist, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw DataError("top-p mass must be in (0,1]");
  dist.validate();
  std::array<std::size_t, kNumDialects> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist.probs[a] > dist.probs[b];  // ties keep canonical order
  });
  LabelVector v;
  double mass = 0;
  for (std::size_t idx : order) {
    v.set(idx, true);
    mass += dist.probs[idx];
    // >= at the crossing element, tolerating accumulated rounding so decimal
    // inputs whose exact sum equals p still cross (0.6 + 0.3 vs 0.9).
    if (mass >= p - 1e-12) break;
  }
  return v;
}

std::vector<PredictionCountGroup> prediction_count_report(
    const LinearModel& model,
    const std::vector<std::pair<std::string, std::vector<Sample>>>& corpora, double threshold) {
  std::vector<PredictionCountGroup> groups;
  for (const auto& [name, samples] : corpora) {
    PredictionCountGroup group;
    group.group = name;
    group.group_size = samples.size();
    std::array<std::size_t, kNumDialects> counts{};
    for (const auto& s : samples) {
      const LabelVector v = predict(model, s, threshold);
      for (std::size_t j = 0; j < kNumDialects; ++j) {
        if (v.get(j)) ++counts[j];
      }
    }
    std::array<std::size_t, kNumDialects> order{};
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    for (std::size_t idx : order) {
      group.rows.push_back({std::string(kDialectCodes[idx]), counts[idx]});
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

std::string prediction_counts_tsv(const std::vector<PredictionCountGroup>& groups) {
  std::string out = "group\tgroup_size\tlabel\tcount\n";
  for (const auto& g : groups) {
    for (const auto& row : g.rows) {
      out += g.group;
      out += '\t';
      out += std::to_string(g.group_size);
      out += '\t';
      out += row.code;
      out += '\t';
      out += std::to_string(row.count);
      out += '\n';
    }
  }
  return out;
}

json EvalReport::to_json() const {
  json j;
  j["labelset"] = labelset_codes;
  j["n_samples"] = n_samples;
  j["threshold"] = threshold;
  j["accuracy_definition"] = accuracy_definition;
  j["macro"] = {{"precision", macro.precision}, {"recall", macro.recall}, {"f1", macro.f1}};
  j["accuracy"] = hamming_accuracy;
  j["per_label"] = json::array();
  for (const auto& pl : macro.per_label) {
    j["per_label"].push_back({{"label", pl.code},
                              {"tp", pl.counts.tp},
                              {"fp", pl.counts.fp},
                              {"fn", pl.counts.fn},
                              {"tn", pl.counts.tn},
                              {"precision", pl.precision},
                              {"recall", pl.recall},
                              {"f1", pl.f1},
                              {"support", pl.support}});
  }
  return j;
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  r.labelset_codes = j.at("labelset").get<std::vector<std::string>>();
  r.n_samples = j.at("n_samples").get<std::size_t>();
  r.threshold = j.at("threshold").get<double>();
  r.accuracy_definition = j.at("accuracy_definition").get<std::string>();
  r.hamming_accuracy = j.at("accuracy").get<double>();
  r.macro.precision = j.at("macro").at("precision").get<double>();
  r.macro.recall = j.at("macro").at("recall").get<double>();
  r.macro.f1 = j.at("macro").at("f1").get<double>();
  for (const auto& pl : j.at("per_label")) {
    PerLabelMetrics m;
    m.code = pl.at("label").get<std::string>();
    m.counts.tp = pl.at("tp").get<std::size_t>();
    m.counts.fp = pl.at("fp").get<std::size_t>();
    m.counts.fn = pl.at("fn").get<std::size_t>();
    m.counts.tn = pl.at("tn").get<std::size_t>();
    m.precision = pl.at("precision").get<double>();
    m.recall = pl.at("recall").get<double>();
    m.f1 = pl.at("f1").get<double>();
    m.support = pl.at("support").get<std::size_t>();
    r.macro.per_label.push_back(std::move(m));
  }
  return r;
}

std::string EvalReport::to_tsv() const {
  std::string out;
  out += "# accuracy definition: " + accuracy_definition + "\n";
  out += "label\tprecision\trecall\tf1\tsupport\ttp\tfp\tfn\ttn\n";
  for (const auto& pl : macro.per_label) {
    out += pl.code;
    out += '\t';
    out += format_double(pl.precision);
    out += '\t';
    out += format_double(pl.recall);
    out += '\t';
    out += format_double(pl.f1);
    out += '\t';
    out += std::to_string(pl.support);
    out += '\t';
    out += std::to_string(pl.counts.tp);
    out += '\t';
    out += std::to_string(pl.counts.fp);
    out += '\t';
    out += std::to_string(pl.counts.fn);
    out += '\t';
    out += std::to_string(pl.counts.tn);
    out += '\n';
  }
  out += "macro\t" + format_double(macro.precision) + '\t' + format_double(macro.recall) + '\t' +
         format_double(macro.f1) + "\t\t\t\t\t\n";
  out += "accuracy\t" + format_double(hamming_accuracy) + "\t\t\t\t\t\t\t\n";
  return out;
}

EvalReport evaluate_pairs(const std::vector<LabelVector>& preds,
                          const std::vector<LabelVector>& golds,
                          const std::vector<DialectLabel>& labelset) {
  auto pairs = restrict_labels(preds, golds, labelset);
  EvalReport report;
  report.macro = macro_prf(pairs);
  report.hamming_accuracy = accuracy(pairs);
  report.n_samples = preds.size();
  for (auto d : labelset) report.labelset_codes.emplace_back(d.code());
  return report;
}

EvalReport evaluate_run(const LinearModel& model, const std::vector<LabeledSample>& evalset,
                        const std::vector<DialectLabel>& labelset, double threshold) {
  std::vector<LabelVector> preds, golds;
  preds.reserve(evalset.size());
  golds.reserve(evalset.size());
  for (const auto& ls : evalset) {
    preds.push_back(predict(model, ls.sample, threshold));
    golds.push_back(ls.labels);
  }
  EvalReport report = evaluate_pairs(preds, golds, labelset);
  report.threshold = threshold;
  return report;
}

}  // namespace mladi
