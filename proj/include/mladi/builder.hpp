#pragma once

#include <array>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "mladi/corpus.hpp"
#include "mladi/labels.hpp"

namespace mladi {

// Land-border neighbour sets over the 18 labels. Symmetric, irreflexive.
class AdjacencyTable {
 public:
  static AdjacencyTable from_pairs(const std::vector<std::pair<DialectLabel, DialectLabel>>& pairs);

  // One line per country, "CODE: CODE,CODE,...". '#' starts a comment.
  // Validation rejects asymmetric or reflexive tables and unknown codes.
  static AdjacencyTable load(const std::filesystem::path& path);

  const std::set<DialectLabel>& neighbours(DialectLabel d) const { return sets_[d.index()]; }

  std::string serialize() const;

 private:
  void validate() const;

  std::array<std::set<DialectLabel>, kNumDialects> sets_;
};

std::set<DialectLabel> neighbours(DialectLabel dia, const AdjacencyTable& table);

enum class BuildMode { kCartography, kPseudoLabel };

std::string to_string(BuildMode m);
BuildMode build_mode_from_string(const std::string& s);

// Per-dialect binary acceptability training set.
struct BinaryDataset {
  DialectLabel dialect;
  std::vector<Sample> positives;
  std::vector<Sample> negatives;
  BuildMode mode = BuildMode::kPseudoLabel;
  std::string adjacency_checksum;  // empty in cartography mode
};

// geo == dia plus MSA sentences irrespective of geolocation, deduplicated by id.
std::vector<Sample> build_positive_set(DialectLabel dia, const std::vector<Sample>& corpus);

// Precision rule: geo outside {dia} + neighbours(dia), aldi > 7/9.
std::vector<Sample> build_negative_set(DialectLabel dia, const std::vector<Sample>& corpus,
                                       const AdjacencyTable& table);

// Cartography mode bipartitions the corpus (negatives = everything not
// positive); pseudo-label mode applies the precision rule and leaves mid-ALDi
// other-geo samples unused. Throws DataError when either side ends up empty.
BinaryDataset build_binary_dataset(DialectLabel dia, const std::vector<Sample>& corpus,
                                   const AdjacencyTable& table, BuildMode mode);

// Two TSVs (positives.tsv / negatives.tsv) plus manifest.json recording mode,
// thresholds and the adjacency checksum.
void save_binary_dataset(const BinaryDataset& ds, const std::filesystem::path& dir);
BinaryDataset load_binary_dataset(const std::filesystem::path& dir);

}  // namespace mladi
