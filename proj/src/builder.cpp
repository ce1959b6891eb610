#include "mladi/builder.hpp"

#include <nlohmann/json.hpp>
#include <unordered_set>

#include "mladi/errors.hpp"
#include "mladi/io.hpp"
#include "mladi/rational.hpp"

namespace mladi {

using nlohmann::json;

AdjacencyTable AdjacencyTable::from_pairs(
    const std::vector<std::pair<DialectLabel, DialectLabel>>& pairs) {
  AdjacencyTable t;
  for (auto [a, b] : pairs) {
    t.sets_[a.index()].insert(b);
    t.sets_[b.index()].insert(a);
  }
  t.validate();
  return t;
}

AdjacencyTable AdjacencyTable::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("adjacency file not found: " + path.string());
  AdjacencyTable t;
  std::array<bool, kNumDialects> declared{};
  auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line_ctx = path.filename().string() + " line " + std::to_string(i + 1);
    std::string line = lines[i];
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) throw DataError(line_ctx + ": expected 'CODE: CODE,...'");
    auto trim = [](std::string s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
      return s;
    };
    std::string head = trim(line.substr(0, colon));
    auto dia = DialectLabel::from_code(head);
    if (!dia) throw DataError(line_ctx + ": unknown dialect code '" + head + "'");
    if (declared[dia->index()]) throw DataError(line_ctx + ": duplicate entry for " + head);
    declared[dia->index()] = true;
    std::string rest = line.substr(colon + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      auto comma = rest.find(',', start);
      std::string tok = trim(comma == std::string::npos ? rest.substr(start)
                                                        : rest.substr(start, comma - start));
      if (!tok.empty()) {
        auto nb = DialectLabel::from_code(tok);
        if (!nb) throw DataError(line_ctx + ": unknown dialect code '" + tok + "'");
        t.sets_[dia->index()].insert(*nb);
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    if (!declared[i]) {
      throw DataError(path.string() + ": missing entry for " + std::string(kDialectCodes[i]));
    }
  }
  t.validate();
  return t;
}

void AdjacencyTable::validate() const {
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    DialectLabel a(i);
    if (sets_[i].count(a)) {
      throw DataError("adjacency table is reflexive at " + std::string(a.code()));
    }
    for (DialectLabel b : sets_[i]) {
      if (!sets_[b.index()].count(a)) {
        throw DataError("adjacency table is asymmetric: " + std::string(a.code()) + " lists " +
                        std::string(b.code()) + " but not vice versa");
      }
    }
  }
}

std::string AdjacencyTable::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < kNumDialects; ++i) {
    out += kDialectCodes[i];
    out += ":";
    bool first = true;
    for (DialectLabel b : sets_[i]) {
      out += first ? " " : ",";
      out += b.code();
      first = false;
    }
    out += '\n';
  }
  return out;
}

std::set<DialectLabel> neighbours(DialectLabel dia, const AdjacencyTable& table) {
  return table.neighbours(dia);
}

std::string to_string(BuildMode m) {
  return m == BuildMode::kCartography ? "cartography" : "pseudo-label";
}

BuildMode build_mode_from_string(const std::string& s) {
  if (s == "cartography") return BuildMode::kCartography;
  if (s == "pseudo-label") return BuildMode::kPseudoLabel;
  throw DataError("unknown build mode: '" + s + "' (expected cartography or pseudo-label)");
}

namespace {

void require_geo_and_aldi(const std::vector<Sample>& corpus) {
  for (const auto& s : corpus) {
    if (!s.aldi) throw DataError("sample '" + s.id + "' has no aldi score");
  }
}

}  // namespace

std::vector<Sample> build_positive_set(DialectLabel dia, const std::vector<Sample>& corpus) {
  std::vector<Sample> out;
  std::unordered_set<std::string> seen;
  for (const auto& s : corpus) {
    const bool geo_match = s.geo && *s.geo == dia;
    const bool msa = s.aldi && is_msa(*s.aldi);
    if ((geo_match || msa) && seen.insert(s.id).second) out.push_back(s);
  }
  return out;
}

std::vector<Sample> build_negative_set(DialectLabel dia, const std::vector<Sample>& corpus,
                                       const AdjacencyTable& table) {
  const auto& nb = table.neighbours(dia);
  std::vector<Sample> out;
  for (const auto& s : corpus) {
    if (!s.geo || !s.aldi) continue;
    if (*s.geo == dia || nb.count(*s.geo)) continue;
    if (!is_highly_dialectal(*s.aldi)) continue;
    out.push_back(s);
  }
  return out;
}

BinaryDataset build_binary_dataset(DialectLabel dia, const std::vector<Sample>& corpus,
                                   const AdjacencyTable& table, BuildMode mode) {
  if (corpus.empty()) throw DataError("cannot build a binary dataset from an empty corpus");
  require_geo_and_aldi(corpus);

  BinaryDataset ds;
  ds.dialect = dia;
  ds.mode = mode;
  ds.positives = build_positive_set(dia, corpus);

  if (mode == BuildMode::kCartography) {
    // Everything that is not positive is negative: an exact bipartition.
    std::unordered_set<std::string> pos_ids;
    for (const auto& s : ds.positives) pos_ids.insert(s.id);
    for (const auto& s : corpus) {
      if (!pos_ids.count(s.id)) ds.negatives.push_back(s);
    }
  } else {
    ds.negatives = build_negative_set(dia, corpus, table);
    ds.adjacency_checksum = checksum_hex(table.serialize());
  }

  if (ds.positives.empty()) {
    throw DataError("dataset for " + std::string(dia.code()) + " has no positive samples");
  }
  if (ds.negatives.empty()) {
    throw DataError("dataset for " + std::string(dia.code()) + " has no negative samples");
  }
  return ds;
}

void save_binary_dataset(const BinaryDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_corpus(ds.positives, dir / "positives.tsv", CorpusFormat::kTsv);
  save_corpus(ds.negatives, dir / "negatives.tsv", CorpusFormat::kTsv);
  json manifest;
  manifest["dialect"] = std::string(ds.dialect.code());
  manifest["mode"] = to_string(ds.mode);
  manifest["msa_threshold"] = kMsaThreshold.str();
  manifest["high_dialectness_threshold"] = kHighDialectnessThreshold.str();
  manifest["adjacency_checksum"] = ds.adjacency_checksum;
  manifest["num_positives"] = ds.positives.size();
  manifest["num_negatives"] = ds.negatives.size();
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

BinaryDataset load_binary_dataset(const std::filesystem::path& dir) {
  json manifest = json::parse(read_file(dir / "manifest.json"));
  BinaryDataset ds;
  auto dia = DialectLabel::from_code(manifest.at("dialect").get<std::string>());
  if (!dia) throw DataError(dir.string() + ": manifest has unknown dialect");
  ds.dialect = *dia;
  ds.mode = build_mode_from_string(manifest.at("mode").get<std::string>());
  ds.adjacency_checksum = manifest.value("adjacency_checksum", "");
  ds.positives = load_corpus(dir / "positives.tsv", CorpusFormat::kTsv);
  ds.negatives = load_corpus(dir / "negatives.tsv", CorpusFormat::kTsv);
  return ds;
}

}  // namespace mladi
