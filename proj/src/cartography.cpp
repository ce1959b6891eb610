#include "mladi/cartography.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <unordered_map>
#include <unordered_set>

#include "mladi/errors.hpp"
#include "mladi/io.hpp"
#include "mladi/rng.hpp"
#include "mladi/svg.hpp"

namespace mladi {

using nlohmann::json;

void TrainingTrace::validate() const {
  if (cadence_steps <= 0) throw DataError("trace cadence_steps must be positive");
  if (epochs <= 0) throw DataError("trace epochs must be positive");
  if (warmup_epochs_ignored < 0) throw DataError("trace warmup must be non-negative");
  if (checkpoints_per_epoch <= 0) throw DataError("trace checkpoints_per_epoch must be positive");
  const std::size_t expected =
      static_cast<std::size_t>(checkpoints_per_epoch) * static_cast<std::size_t>(epochs);
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.id).second) throw DataError("trace has duplicate id '" + e.id + "'");
    if (e.probs.size() != expected) {
      throw DataError("trace entry '" + e.id + "' has " + std::to_string(e.probs.size()) +
                      " checkpoints, expected " + std::to_string(expected));
    }
    if (e.gold != 0 && e.gold != 1) throw DataError("trace gold must be 0/1 for '" + e.id + "'");
    for (double p : e.probs) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw DataError("trace entry '" + e.id + "' has probability outside [0,1]");
      }
    }
  }
}

TrainingTrace load_trace(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("trace file not found: " + path.string());
  auto lines = read_lines(path);
  if (lines.empty()) throw DataError("empty trace file: " + path.string());
  json header = json::parse(lines[0], nullptr, false);
  if (header.is_discarded() || !header.is_object() || !header.contains("cadence_steps")) {
    throw DataError(path.string() + " line 1: expected trace header object");
  }
  TrainingTrace trace;
  trace.cadence_steps = header.at("cadence_steps").get<int>();
  trace.epochs = header.at("epochs").get<int>();
  trace.warmup_epochs_ignored = header.at("warmup_epochs_ignored").get<int>();
  trace.checkpoints_per_epoch = header.at("checkpoints_per_epoch").get<int>();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    json obj = json::parse(lines[i], nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw DataError(path.string() + " line " + std::to_string(i + 1) + ": malformed JSON");
    }
    TraceEntry e;
    e.id = obj.at("id").get<std::string>();
    e.gold = obj.at("gold").get<int>();
    e.probs = obj.at("probs").get<std::vector<double>>();
    trace.entries.push_back(std::move(e));
  }
  trace.validate();
  return trace;
}

std::string serialize_trace(const TrainingTrace& trace) {
  json header;
  header["cadence_steps"] = trace.cadence_steps;
  header["epochs"] = trace.epochs;
  header["warmup_epochs_ignored"] = trace.warmup_epochs_ignored;
  header["checkpoints_per_epoch"] = trace.checkpoints_per_epoch;
  std::string out = header.dump() + "\n";
  for (const auto& e : trace.entries) {
    json obj;
    obj["id"] = e.id;
    obj["gold"] = e.gold;
    obj["probs"] = e.probs;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_trace(const TrainingTrace& trace, const std::filesystem::path& path) {
  atomic_write(path, serialize_trace(trace));
}

std::vector<CartographyRecord> compute_metrics(const TrainingTrace& trace) {
  trace.validate();
  const std::size_t skip = static_cast<std::size_t>(trace.warmup_epochs_ignored) *
                           static_cast<std::size_t>(trace.checkpoints_per_epoch);
  const std::size_t total =
      static_cast<std::size_t>(trace.epochs) * static_cast<std::size_t>(trace.checkpoints_per_epoch);
  if (skip >= total) {
    throw DataError("no checkpoints remain after ignoring " +
                    std::to_string(trace.warmup_epochs_ignored) + " warmup epoch(s)");
  }
  std::vector<CartographyRecord> records;
  records.reserve(trace.entries.size());
  for (const auto& e : trace.entries) {
    CartographyRecord r;
    r.id = e.id;
    const std::size_t n = e.probs.size() - skip;
    double mean = 0;
    std::size_t correct = 0;
    for (std::size_t i = skip; i < e.probs.size(); ++i) {
      mean += e.probs[i];
      if (e.probs[i] > 0.5) ++correct;  // exactly 0.5 counts as incorrect
    }
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t i = skip; i < e.probs.size(); ++i) {
      const double d = e.probs[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);  // population variance
    r.confidence = mean;
    r.variability = std::sqrt(var);
    r.correctness = static_cast<double>(correct) / static_cast<double>(n);
    r.bin = bin_by_correctness(r.correctness);
    records.push_back(std::move(r));
  }
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return records;
}

const std::array<std::string, 7> kCorrectnessBinLabels = {
    "0", "(0,0.2)", "[0.2,0.4)", "[0.4,0.6)", "[0.6,0.8)", "[0.8,1)", "1"};

int bin_by_correctness(double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw DataError("correctness outside [0,1]: " + format_double(c));
  if (c == 0.0) return 0;
  if (c == 1.0) return 6;
  if (c < 0.2) return 1;
  if (c < 0.4) return 2;
  if (c < 0.6) return 3;
  if (c < 0.8) return 4;
  return 5;
}

std::vector<std::string> flag_suspect_negatives(const std::vector<CartographyRecord>& records,
                                                const std::map<std::string, int>& golds) {
  std::vector<const CartographyRecord*> flagged;
  for (const auto& r : records) {
    auto it = golds.find(r.id);
    if (it == golds.end()) throw DataError("no gold label for record '" + r.id + "'");
    if (it->second == 0 && r.correctness < 1.0) flagged.push_back(&r);
  }
  std::sort(flagged.begin(), flagged.end(), [](const auto* a, const auto* b) {
    if (a->correctness != b->correctness) return a->correctness < b->correctness;
    return a->id < b->id;
  });
  std::vector<std::string> ids;
  ids.reserve(flagged.size());
  for (const auto* r : flagged) ids.push_back(r->id);
  return ids;
}

std::string export_annotation_sheet(const std::vector<CartographyRecord>& records,
                                    const std::map<std::string, int>& golds,
                                    const std::vector<Sample>& corpus,
                                    const AnnotationSheetConfig& cfg) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : corpus) by_id[s.id] = &s;

  // pools[polarity][bin], polarity 0 = positive non-MSA, 1 = negative
  std::array<std::array<std::vector<const CartographyRecord*>, 7>, 2> pools;
  for (const auto& r : records) {
    auto git = golds.find(r.id);
    if (git == golds.end()) throw DataError("no gold label for record '" + r.id + "'");
    auto sit = by_id.find(r.id);
    if (sit == by_id.end()) throw DataError("record '" + r.id + "' not found in corpus");
    if (git->second == 1) {
      const Sample& s = *sit->second;
      if (s.aldi && is_msa(*s.aldi)) continue;  // MSA positives are not informative to annotate
      pools[0][static_cast<std::size_t>(r.bin)].push_back(&r);
    } else {
      pools[1][static_cast<std::size_t>(r.bin)].push_back(&r);
    }
  }

  std::string out = "id\ttext\tpolarity\tbin\tcorrectness\tquestion\toptions\tanswer\n";
  const std::array<std::string, 2> polarity_names = {"positive", "negative"};
  for (std::size_t pol = 0; pol < 2; ++pol) {
    for (std::size_t bin = 0; bin < 7; ++bin) {
      auto& pool = pools[pol][bin];
      std::sort(pool.begin(), pool.end(),
                [](const auto* a, const auto* b) { return a->id < b->id; });
      Rng rng = Rng::derive(cfg.seed, pol, bin);
      auto drawn = rng.sample_without_replacement(pool, cfg.per_bin);
      for (const auto* r : drawn) {
        const Sample& s = *by_id.at(r->id);
        out += r->id;
        out += '\t';
        out += s.text;
        out += '\t';
        out += polarity_names[pol];
        out += '\t';
        out += kCorrectnessBinLabels[bin];
        out += '\t';
        out += format_double(r->correctness);
        out += '\t';
        out += kAnnotationQuestion;
        out += '\t';
        out += kAnnotationOptions;
        out += "\t\n";
      }
    }
  }
  return out;
}

std::string cartography_scatter_svg(const std::vector<CartographyRecord>& records) {
  svg::ScatterSpec spec;
  spec.title = "Training dynamics";
  spec.x_label = "variability";
  spec.y_label = "confidence";
  spec.x_min = 0;
  spec.x_max = 0.5;
  spec.y_min = 0;
  spec.y_max = 1;
  spec.group_labels.assign(kCorrectnessBinLabels.begin(), kCorrectnessBinLabels.end());
  for (const auto& r : records) {
    spec.points.push_back({r.variability, r.confidence, r.bin});
  }
  return svg::scatter(spec);
}

std::string serialize_records(const std::vector<CartographyRecord>& records,
                              const std::map<std::string, int>& golds) {
  std::string out = "id\tgold\tconfidence\tvariability\tcorrectness\tbin\n";
  for (const auto& r : records) {
    auto it = golds.find(r.id);
    out += r.id;
    out += '\t';
    out += it == golds.end() ? "" : std::to_string(it->second);
    out += '\t';
    out += format_double(r.confidence);
    out += '\t';
    out += format_double(r.variability);
    out += '\t';
    out += format_double(r.correctness);
    out += '\t';
    out += std::to_string(r.bin);
    out += '\n';
  }
  return out;
}

void load_records(const std::filesystem::path& path, std::vector<CartographyRecord>& records,
                  std::map<std::string, int>& golds) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "id\tgold\tconfidence\tvariability\tcorrectness\tbin") {
    throw DataError(path.string() + ": not a cartography records file");
  }
  records.clear();
  golds.clear();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_tabs(lines[i]);
    if (f.size() != 6) {
      throw DataError(path.string() + " line " + std::to_string(i + 1) + ": expected 6 fields");
    }
    CartographyRecord r;
    r.id = f[0];
    if (!f[1].empty()) golds[r.id] = static_cast<int>(parse_double(f[1], "gold"));
    r.confidence = parse_double(f[2], "confidence");
    r.variability = parse_double(f[3], "variability");
    r.correctness = parse_double(f[4], "correctness");
    r.bin = static_cast<int>(parse_double(f[5], "bin"));
    records.push_back(std::move(r));
  }
}

}  // namespace mladi
