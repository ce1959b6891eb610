#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mladi/builder.hpp"
#include "mladi/cartography.hpp"
#include "mladi/corpus.hpp"
#include "mladi/encoder.hpp"
#include "mladi/rng.hpp"

namespace mladi {

struct TrainConfig {
  int epochs = 3;
  int batch_size = 24;
  double validation_fraction = 0.1;  // 90/10 split
  std::uint64_t split_seed = 42;
  double dropout = 0.3;
  int frozen_bottom_layers = 8;
  double inference_threshold = 0.3;
  double learning_rate = 0.05;  // Adam; recorded in the run manifest
  std::uint64_t shuffle_seed = 13;

  // Trace logging (binary mode only). When cadence_fraction > 0, the cadence
  // is derived per dataset as max(1, floor(steps_per_epoch * fraction)).
  int trace_cadence_steps = 300;
  double trace_cadence_fraction = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Linear head over (scaled) encoder features. Binary scorers have one output;
// the multi-label classifier has 18.
class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(std::shared_ptr<Encoder> encoder, std::size_t n_outputs);

  std::size_t n_outputs() const { return n_outputs_; }
  std::size_t dim() const { return dim_; }
  const std::shared_ptr<Encoder>& encoder() const { return encoder_; }

  std::vector<double> logits(const SparseVec& base_features) const;
  std::vector<double> logits(std::string_view text) const;
  std::vector<double> probabilities(std::string_view text) const;

  // Binary scorer convenience: P(acceptable).
  double score(std::string_view text) const;

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }

 private:
  std::shared_ptr<Encoder> encoder_;
  std::size_t n_outputs_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> weights_;  // n_outputs x dim, row-major
  std::vector<double> bias_;
};

double sigmoid(double z);
// Numerically stable binary cross-entropy against a logit.
double bce_with_logit(double logit, double target);

struct EpochStats {
  int epoch = 0;  // 1-based
  double mean_train_loss = 0;
  double val_micro_f1 = 0;
};

struct BinaryTrainResult {
  LinearModel scorer;
  TrainingTrace trace;
  std::vector<EpochStats> log;
};

// Trains a binary acceptability scorer on ds, logging every sample's
// gold-label probability at the trace cadence. Throws on single-class data.
BinaryTrainResult train_binary(const BinaryDataset& ds, std::shared_ptr<Encoder> enc,
                               const TrainConfig& cfg);

struct MultilabelTrainResult {
  LinearModel model;
  std::vector<EpochStats> log;
  int best_epoch = 0;  // 1-based epoch whose checkpoint was kept
  double best_val_micro_f1 = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

// 18-logit classifier, per-label BCE, bottom cfg.frozen_bottom_layers frozen,
// best validation-micro-F1 checkpoint kept (earliest epoch wins ties).
MultilabelTrainResult train_multilabel(const std::vector<LabeledSample>& ds,
                                       std::shared_ptr<Encoder> enc, const TrainConfig& cfg);

// bit = 1 iff sigmoid(logit) >= threshold.
LabelVector predict(const LinearModel& model, const Sample& x, double threshold = 0.3);

// Mean per-label BCE per sample, deterministic (no dropout).
std::map<std::string, double> per_example_loss(const LinearModel& model,
                                               const std::vector<LabeledSample>& ds);

// Micro-averaged F1 over all (sample, label) cells at the given threshold.
double micro_f1(const LinearModel& model, const std::vector<LabeledSample>& ds, double threshold);

// 90/10-style id split used by both the plain and curriculum trainers.
std::pair<std::vector<std::string>, std::vector<std::string>> split_ids(
    const std::vector<LabeledSample>& ds, double validation_fraction, std::uint64_t seed);

// Single-stage gradient work shared with the curriculum runner.
namespace detail {
struct TrainItem {
  std::string id;
  SparseVec features;
  std::vector<double> targets;  // one per output
};

class Optimizer;

class Trainer {
 public:
  Trainer(LinearModel& model, const TrainConfig& cfg);
  ~Trainer();

  // One pass over items in seeded shuffled batches; returns mean loss.
  // step_hook (optional) runs after every optimizer step.
  double run_epoch(std::vector<TrainItem*>& items, Rng& rng,
                   const std::function<void(int local_step)>& step_hook = nullptr);

 private:
  LinearModel& model_;
  TrainConfig cfg_;
  std::unique_ptr<Optimizer> opt_;
};

// Mean-over-labels BCE loss and gradients for one sample; used by training and
// by the finite-difference checks in the test suite.
double loss_and_grad(const LinearModel& model, const SparseVec& features,
                     const std::vector<double>& targets, std::vector<double>& grad_w,
                     std::vector<double>& grad_b, std::vector<std::vector<double>>& grad_layers);
}  // namespace detail

struct ModelCheckpointInfo {
  std::string kind;  // "binary" | "multilabel"
  nlohmann::json metrics;
  TrainConfig config;
};

void save_model(const LinearModel& model, const std::filesystem::path& dir,
                const ModelCheckpointInfo& info);
LinearModel load_model(const std::filesystem::path& dir);
nlohmann::json load_model_manifest(const std::filesystem::path& dir);

}  // namespace mladi
