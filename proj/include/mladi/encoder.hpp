#pragma once

#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace mladi {

// Sparse feature vector, entries sorted by index, indices unique.
struct SparseVec {
  std::vector<std::pair<std::uint32_t, double>> entries;
};

// Text encoder contract for the trainer. An encoder owns an ordered stack of
// elementwise-scale parameter groups ("layers", bottom to top) applied to the
// base features; freezing the bottom k groups pins them at their current
// values while the head and the remaining groups train.
class Encoder {
 public:
  virtual ~Encoder() = default;

  // Deterministic for a given configuration.
  virtual SparseVec encode(std::string_view text) const = 0;
  virtual std::size_t feature_dim() const = 0;

  virtual int layer_count() const = 0;
  virtual std::vector<std::vector<double>>& layer_params() = 0;
  virtual const std::vector<std::vector<double>>& layer_params() const = 0;
  virtual const std::vector<bool>& frozen_mask() const = 0;

  // Freeze the bottom k layer groups. Returns false (after logging a warning)
  // when the encoder has fewer than k layers, leaving everything trainable.
  virtual bool freeze_bottom(int k) = 0;

  virtual nlohmann::json config() const = 0;
};

struct ReferenceEncoderConfig {
  std::size_t buckets = 1u << 15;
  std::vector<int> ngram_sizes = {2, 3, 4};
  std::uint64_t hash_seed = 0;
  int layers = 1;

  nlohmann::json to_json() const;
  static ReferenceEncoderConfig from_json(const nlohmann::json& j);
};

// Hashed character n-gram features feeding the linear head: the desk-scale
// stand-in for a pretrained encoder. n-grams run over UTF-8 bytes, counts are
// L2-normalized, and each "layer" is an elementwise scale vector initialized
// to one.
class ReferenceEncoder final : public Encoder {
 public:
  explicit ReferenceEncoder(ReferenceEncoderConfig cfg = {});

  SparseVec encode(std::string_view text) const override;
  std::size_t feature_dim() const override { return cfg_.buckets; }

  int layer_count() const override { return cfg_.layers; }
  std::vector<std::vector<double>>& layer_params() override { return layers_; }
  const std::vector<std::vector<double>>& layer_params() const override { return layers_; }
  const std::vector<bool>& frozen_mask() const override { return frozen_; }
  bool freeze_bottom(int k) override;

  nlohmann::json config() const override;
  const ReferenceEncoderConfig& reference_config() const { return cfg_; }

  static std::shared_ptr<ReferenceEncoder> from_config(const nlohmann::json& j);

 private:
  ReferenceEncoderConfig cfg_;
  std::vector<std::vector<double>> layers_;
  std::vector<bool> frozen_;
};

}  // namespace mladi
