#include "mladi/corpus.hpp"

#include <nlohmann/json.hpp>
#include <unordered_set>

#include "mladi/errors.hpp"
#include "mladi/io.hpp"

namespace mladi {

using nlohmann::json;

std::string to_string(SourceTag tag) {
  switch (tag) {
    case SourceTag::kTrainPool: return "train-pool";
    case SourceTag::kDev: return "dev";
    case SourceTag::kTest: return "test";
    case SourceTag::kExternal: return "external";
  }
  return "train-pool";
}

SourceTag source_tag_from_string(const std::string& s) {
  if (s == "train-pool" || s.empty()) return SourceTag::kTrainPool;
  if (s == "dev") return SourceTag::kDev;
  if (s == "test") return SourceTag::kTest;
  if (s == "external") return SourceTag::kExternal;
  throw DataError("unknown source tag: '" + s + "'");
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::kBinaryClassifiers: return "binary-classifiers";
    case Provenance::kGpt: return "gpt";
    case Provenance::kHybrid: return "hybrid";
    case Provenance::kGold: return "gold";
  }
  return "hybrid";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "binary-classifiers") return Provenance::kBinaryClassifiers;
  if (s == "gpt") return Provenance::kGpt;
  if (s == "hybrid") return Provenance::kHybrid;
  if (s == "gold") return Provenance::kGold;
  throw DataError("unknown provenance: '" + s + "'");
}

CorpusFormat corpus_format_from_string(const std::string& s) {
  if (s == "tsv") return CorpusFormat::kTsv;
  if (s == "jsonl") return CorpusFormat::kJsonl;
  throw DataError("unknown corpus format: '" + s + "' (expected tsv or jsonl)");
}

CorpusFormat guess_format(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") return CorpusFormat::kJsonl;
  return CorpusFormat::kTsv;
}

namespace {

constexpr char kTsvHeader[] = "id\ttext\tgeo\taldi";

void validate_aldi(double v, std::size_t line_no) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DataError("line " + std::to_string(line_no) + ": aldi out of range [0,1]: " +
                    format_double(v));
  }
}

DialectLabel parse_geo(const std::string& code, std::size_t line_no) {
  auto d = DialectLabel::from_code(code);
  if (!d) throw DataError("line " + std::to_string(line_no) + ": unknown dialect code '" + code + "'");
  return *d;
}

void check_duplicate(std::unordered_set<std::string>& seen, const std::string& id,
                     std::size_t line_no) {
  if (!seen.insert(id).second) {
    throw DataError("line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
  }
}

std::vector<Sample> parse_tsv(const std::vector<std::string>& lines) {
  if (lines.empty()) throw DataError("empty corpus file");
  if (lines[0] != kTsvHeader) {
    throw DataError("line 1: expected TSV header '" + std::string(kTsvHeader) + "'");
  }
  std::vector<Sample> samples;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    auto fields = split_tabs(lines[i]);
    if (fields.size() != 4) {
      throw DataError("line " + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    Sample s;
    s.id = fields[0];
    if (s.id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty id");
    check_duplicate(seen, s.id, line_no);
    s.text = fields[1];
    if (!fields[2].empty()) s.geo = parse_geo(fields[2], line_no);
    if (!fields[3].empty()) {
      double v = parse_double(fields[3], "line " + std::to_string(line_no) + ": aldi");
      validate_aldi(v, line_no);
      s.aldi = v;
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<Sample> parse_jsonl(const std::vector<std::string>& lines) {
  std::vector<Sample> samples;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    json obj = json::parse(lines[i], nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON object");
    }
    Sample s;
    if (!obj.contains("id") || !obj["id"].is_string()) {
      throw DataError("line " + std::to_string(line_no) + ": missing string key 'id'");
    }
    if (!obj.contains("text") || !obj["text"].is_string()) {
      throw DataError("line " + std::to_string(line_no) + ": missing string key 'text'");
    }
    s.id = obj["id"].get<std::string>();
    check_duplicate(seen, s.id, line_no);
    s.text = obj["text"].get<std::string>();
    if (obj.contains("geo") && !obj["geo"].is_null()) {
      if (!obj["geo"].is_string()) {
        throw DataError("line " + std::to_string(line_no) + ": 'geo' must be a string");
      }
      s.geo = parse_geo(obj["geo"].get<std::string>(), line_no);
    }
    if (obj.contains("aldi") && !obj["aldi"].is_null()) {
      if (!obj["aldi"].is_number()) {
        throw DataError("line " + std::to_string(line_no) + ": 'aldi' must be a number");
      }
      double v = obj["aldi"].get<double>();
      validate_aldi(v, line_no);
      s.aldi = v;
    }
    if (obj.contains("source") && !obj["source"].is_null()) {
      s.source = source_tag_from_string(obj["source"].get<std::string>());
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace

std::vector<Sample> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw DataError("corpus file not found: " + path.string());
  auto lines = read_lines(path);
  return format == CorpusFormat::kTsv ? parse_tsv(lines) : parse_jsonl(lines);
}

std::vector<Sample> load_corpus(const std::filesystem::path& path) {
  return load_corpus(path, guess_format(path));
}

std::string serialize_corpus(const std::vector<Sample>& samples, CorpusFormat format) {
  std::string out;
  if (format == CorpusFormat::kTsv) {
    out = kTsvHeader;
    out += '\n';
    for (const auto& s : samples) {
      out += s.id;
      out += '\t';
      out += s.text;
      out += '\t';
      if (s.geo) out += s.geo->code();
      out += '\t';
      if (s.aldi) out += format_double(*s.aldi);
      out += '\n';
    }
  } else {
    for (const auto& s : samples) {
      json obj;
      obj["id"] = s.id;
      obj["text"] = s.text;
      obj["geo"] = s.geo ? json(std::string(s.geo->code())) : json(nullptr);
      obj["aldi"] = s.aldi ? json(*s.aldi) : json(nullptr);
      obj["source"] = to_string(s.source);
      out += obj.dump();
      out += '\n';
    }
  }
  return out;
}

void save_corpus(const std::vector<Sample>& samples, const std::filesystem::path& path,
                 CorpusFormat format) {
  atomic_write(path, serialize_corpus(samples, format));
}

namespace {
constexpr char kLabeledHeader[] = "id\ttext\tgeo\taldi\tlabels\tprovenance\tsource";
}

std::vector<LabeledSample> load_labeled(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("dataset file not found: " + path.string());
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != kLabeledHeader) {
    throw DataError(path.string() + ": expected header '" + std::string(kLabeledHeader) + "'");
  }
  std::vector<LabeledSample> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    auto fields = split_tabs(lines[i]);
    if (fields.size() != 7) {
      throw DataError("line " + std::to_string(line_no) + ": expected 7 fields, got " +
                      std::to_string(fields.size()));
    }
    LabeledSample ls;
    ls.sample.id = fields[0];
    check_duplicate(seen, ls.sample.id, line_no);
    ls.sample.text = fields[1];
    if (!fields[2].empty()) ls.sample.geo = parse_geo(fields[2], line_no);
    if (!fields[3].empty()) {
      double v = parse_double(fields[3], "line " + std::to_string(line_no) + ": aldi");
      validate_aldi(v, line_no);
      ls.sample.aldi = v;
    }
    ls.labels = LabelVector::from_bitstring(fields[4]);
    ls.provenance = provenance_from_string(fields[5]);
    ls.routed_source = fields[6];
    out.push_back(std::move(ls));
  }
  return out;
}

std::string serialize_labeled(const std::vector<LabeledSample>& ds) {
  std::string out = kLabeledHeader;
  out += '\n';
  for (const auto& ls : ds) {
    const auto& s = ls.sample;
    out += s.id;
    out += '\t';
    out += s.text;
    out += '\t';
    if (s.geo) out += s.geo->code();
    out += '\t';
    if (s.aldi) out += format_double(*s.aldi);
    out += '\t';
    out += ls.labels.to_bitstring();
    out += '\t';
    out += to_string(ls.provenance);
    out += '\t';
    out += ls.routed_source;
    out += '\n';
  }
  return out;
}

void save_labeled(const std::vector<LabeledSample>& ds, const std::filesystem::path& path) {
  atomic_write(path, serialize_labeled(ds));
}

double require_aldi(const Sample& s) {
  if (!s.aldi) throw DataError("sample '" + s.id + "' has no aldi score");
  return *s.aldi;
}

bool is_msa(double aldi) { return aldi < kMsaThreshold; }
bool is_msa(const Sample& s) { return is_msa(require_aldi(s)); }

bool is_highly_dialectal(double aldi) { return aldi > kHighDialectnessThreshold; }
bool is_highly_dialectal(const Sample& s) { return is_highly_dialectal(require_aldi(s)); }

std::size_t label_cardinality(const LabelVector& v) { return v.cardinality(); }

const std::array<std::string, kNumAldiIntervals> kAldiIntervalLabels = {
    "[0,1/9)", "[1/9,0.44)", "[0.44,7/9)", "[7/9,1]"};

std::size_t aldi_interval_index(double aldi) {
  if (!(aldi >= 0.0 && aldi <= 1.0)) throw DataError("aldi outside [0,1]: " + format_double(aldi));
  if (aldi < kMsaThreshold) return 0;
  if (aldi < kLowMidBoundary) return 1;
  if (aldi < kHighDialectnessThreshold) return 2;
  return 3;
}

FilterResult filter_zero_cardinality(const std::vector<LabeledSample>& ds) {
  FilterResult res;
  res.kept.reserve(ds.size());
  for (const auto& ls : ds) {
    if (ls.labels.cardinality() >= 1) {
      res.kept.push_back(ls);
    } else {
      ++res.dropped;
    }
  }
  return res;
}

}  // namespace mladi
