#include "mladi/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>

#include "mladi/errors.hpp"

namespace mladi {

using nlohmann::json;

json ReferenceEncoderConfig::to_json() const {
  json j;
  j["type"] = "reference";
  j["buckets"] = buckets;
  j["ngram_sizes"] = ngram_sizes;
  j["hash_seed"] = hash_seed;
  j["layers"] = layers;
  return j;
}

ReferenceEncoderConfig ReferenceEncoderConfig::from_json(const json& j) {
  ReferenceEncoderConfig cfg;
  cfg.buckets = j.at("buckets").get<std::size_t>();
  cfg.ngram_sizes = j.at("ngram_sizes").get<std::vector<int>>();
  cfg.hash_seed = j.at("hash_seed").get<std::uint64_t>();
  cfg.layers = j.at("layers").get<int>();
  return cfg;
}

ReferenceEncoder::ReferenceEncoder(ReferenceEncoderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.buckets == 0) throw DataError("encoder bucket count must be positive");
  if (cfg_.layers < 1) throw DataError("encoder must have at least one layer group");
  for (int n : cfg_.ngram_sizes) {
    if (n < 1) throw DataError("n-gram sizes must be positive");
  }
  layers_.assign(static_cast<std::size_t>(cfg_.layers),
                 std::vector<double>(cfg_.buckets, 1.0));
  frozen_.assign(static_cast<std::size_t>(cfg_.layers), false);
}

SparseVec ReferenceEncoder::encode(std::string_view text) const {
  std::map<std::uint32_t, double> counts;
  for (int n : cfg_.ngram_sizes) {
    const auto un = static_cast<std::size_t>(n);
    if (text.size() < un) continue;
    for (std::size_t i = 0; i + un <= text.size(); ++i) {
      std::uint64_t h = 0xcbf29ce484222325ULL ^ (cfg_.hash_seed + static_cast<std::uint64_t>(n));
      for (std::size_t k = 0; k < un; ++k) {
        h ^= static_cast<unsigned char>(text[i + k]);
        h *= 0x100000001b3ULL;
      }
      counts[static_cast<std::uint32_t>(h % cfg_.buckets)] += 1.0;
    }
  }
  double norm = 0;
  for (const auto& [idx, c] : counts) norm += c * c;
  norm = norm > 0 ? std::sqrt(norm) : 1.0;
  SparseVec v;
  v.entries.reserve(counts.size());
  for (const auto& [idx, c] : counts) v.entries.emplace_back(idx, c / norm);
  return v;
}

bool ReferenceEncoder::freeze_bottom(int k) {
  if (k < 0) throw DataError("freeze count must be non-negative");
  if (k > cfg_.layers) {
    std::cerr << "[mladi] warning: freeze(" << k << ") requested but encoder has only "
              << cfg_.layers << " layer(s); leaving all layers trainable\n";
    return false;
  }
  for (int i = 0; i < k; ++i) frozen_[static_cast<std::size_t>(i)] = true;
  return true;
}

json ReferenceEncoder::config() const { return cfg_.to_json(); }

std::shared_ptr<ReferenceEncoder> ReferenceEncoder::from_config(const json& j) {
  if (j.value("type", "") != "reference") {
    throw DataError("unsupported encoder type in checkpoint: " + j.value("type", "<none>"));
  }
  return std::make_shared<ReferenceEncoder>(ReferenceEncoderConfig::from_json(j));
}

}  // namespace mladi
