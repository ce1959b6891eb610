#include "mladi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <unordered_map>
#include <unordered_set>

#include "mladi/errors.hpp"
#include "mladi/io.hpp"

namespace mladi {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw DataError("epochs must be >= 1");
  if (batch_size < 1) throw DataError("batch_size must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw DataError("validation_fraction must be in [0,1)");
  }
  if (!(inference_threshold > 0.0 && inference_threshold < 1.0)) {
    throw DataError("inference_threshold must be in (0,1)");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DataError("dropout must be in [0,1)");
  if (frozen_bottom_layers < 0) throw DataError("frozen_bottom_layers must be >= 0");
  if (!(learning_rate > 0.0)) throw DataError("learning_rate must be positive");
  if (trace_cadence_steps < 1 && trace_cadence_fraction <= 0) {
    throw DataError("trace cadence must be positive");
  }
}

json TrainConfig::to_json() const {
  json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["validation_fraction"] = validation_fraction;
  j["split_seed"] = split_seed;
  j["dropout"] = dropout;
  j["frozen_bottom_layers"] = frozen_bottom_layers;
  j["selection_metric"] = "validation micro F1";
  j["inference_threshold"] = inference_threshold;
  j["loss"] = "per-label binary cross-entropy";
  j["learning_rate"] = learning_rate;
  j["shuffle_seed"] = shuffle_seed;
  j["trace_cadence_steps"] = trace_cadence_steps;
  j["trace_cadence_fraction"] = trace_cadence_fraction;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.validation_fraction = j.value("validation_fraction", cfg.validation_fraction);
  cfg.split_seed = j.value("split_seed", cfg.split_seed);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.frozen_bottom_layers = j.value("frozen_bottom_layers", cfg.frozen_bottom_layers);
  cfg.inference_threshold = j.value("inference_threshold", cfg.inference_threshold);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.shuffle_seed = j.value("shuffle_seed", cfg.shuffle_seed);
  cfg.trace_cadence_steps = j.value("trace_cadence_steps", cfg.trace_cadence_steps);
  cfg.trace_cadence_fraction = j.value("trace_cadence_fraction", cfg.trace_cadence_fraction);
  return cfg;
}

LinearModel::LinearModel(std::shared_ptr<Encoder> encoder, std::size_t n_outputs)
    : encoder_(std::move(encoder)), n_outputs_(n_outputs) {
  if (!encoder_) throw DataError("model requires an encoder");
  dim_ = encoder_->feature_dim();
  weights_.assign(n_outputs_ * dim_, 0.0);
  bias_.assign(n_outputs_, 0.0);
}

double sigmoid(double z) {
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

namespace {

// h_k = x_k * prod of layer scales at k
double scaled_feature(const Encoder& enc, std::uint32_t idx, double value) {
  double v = value;
  for (const auto& layer : enc.layer_params()) v *= layer[idx];
  return v;
}

}  // namespace

std::vector<double> LinearModel::logits(const SparseVec& x) const {
  std::vector<double> z(bias_);
  for (const auto& [idx, value] : x.entries) {
    const double h = scaled_feature(*encoder_, idx, value);
    for (std::size_t j = 0; j < n_outputs_; ++j) {
      z[j] += weights_[j * dim_ + idx] * h;
    }
  }
  return z;
}

std::vector<double> LinearModel::logits(std::string_view text) const {
  return logits(encoder_->encode(text));
}

std::vector<double> LinearModel::probabilities(std::string_view text) const {
  auto z = logits(text);
  for (auto& v : z) v = sigmoid(v);
  return z;
}

double LinearModel::score(std::string_view text) const {
  if (n_outputs_ != 1) throw DataError("score() requires a single-output scorer");
  return probabilities(text)[0];
}

namespace detail {

namespace {

// Adds the sample's gradients into the dense buffers; returns the loss.
double accumulate_loss_and_grad(const LinearModel& model, const SparseVec& x,
                                const std::vector<double>& targets, std::vector<double>& gw,
                                std::vector<double>& gb,
                                std::vector<std::vector<double>>& glayers) {
  const Encoder& enc = *model.encoder();
  const auto& layers = enc.layer_params();
  const std::size_t n_out = model.n_outputs();
  const std::size_t dim = model.dim();
  const std::size_t n_layers = layers.size();

  auto z = model.logits(x);
  double loss = 0;
  std::vector<double> err(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    loss += bce_with_logit(z[j], targets[j]);
    err[j] = (sigmoid(z[j]) - targets[j]) / static_cast<double>(n_out);
  }
  loss /= static_cast<double>(n_out);

  for (std::size_t j = 0; j < n_out; ++j) gb[j] += err[j];

  std::vector<double> pre(n_layers + 1), suf(n_layers + 1);
  for (const auto& [idx, value] : x.entries) {
    // prefix/suffix products of the scale stack at this feature index
    pre[0] = 1.0;
    for (std::size_t l = 0; l < n_layers; ++l) pre[l + 1] = pre[l] * layers[l][idx];
    suf[n_layers] = 1.0;
    for (std::size_t l = n_layers; l-- > 0;) suf[l] = suf[l + 1] * layers[l][idx];

    const double h = value * pre[n_layers];
    double a = 0;  // sum_j err_j * w[j,idx]
    for (std::size_t j = 0; j < n_out; ++j) {
      gw[j * dim + idx] += err[j] * h;
      a += err[j] * model.weights()[j * dim + idx];
    }
    for (std::size_t l = 0; l < n_layers; ++l) {
      glayers[l][idx] += a * value * pre[l] * suf[l + 1];
    }
  }
  return loss;
}

}  // namespace

double loss_and_grad(const LinearModel& model, const SparseVec& features,
                     const std::vector<double>& targets, std::vector<double>& grad_w,
                     std::vector<double>& grad_b, std::vector<std::vector<double>>& grad_layers) {
  const std::size_t n_layers = model.encoder()->layer_params().size();
  grad_w.assign(model.n_outputs() * model.dim(), 0.0);
  grad_b.assign(model.n_outputs(), 0.0);
  grad_layers.assign(n_layers, std::vector<double>(model.dim(), 0.0));
  return accumulate_loss_and_grad(model, features, targets, grad_w, grad_b, grad_layers);
}

class Optimizer {
 public:
  Optimizer(LinearModel& model, double lr) : model_(model), lr_(lr) {
    const std::size_t wn = model.weights().size();
    const std::size_t bn = model.bias().size();
    grad_w.assign(wn, 0.0);
    grad_b.assign(bn, 0.0);
    mw_.assign(wn, 0.0);
    vw_.assign(wn, 0.0);
    mb_.assign(bn, 0.0);
    vb_.assign(bn, 0.0);
    const auto& layers = model.encoder()->layer_params();
    grad_layers.assign(layers.size(), {});
    ml_.assign(layers.size(), {});
    vl_.assign(layers.size(), {});
    for (std::size_t l = 0; l < layers.size(); ++l) {
      grad_layers[l].assign(layers[l].size(), 0.0);
      ml_[l].assign(layers[l].size(), 0.0);
      vl_[l].assign(layers[l].size(), 0.0);
    }
  }

  void zero() {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (auto& g : grad_layers) std::fill(g.begin(), g.end(), 0.0);
  }

  void step(std::size_t batch_count) {
    ++t_;
    const double scale = 1.0 / static_cast<double>(batch_count);
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    auto update = [&](std::vector<double>& theta, std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = g[i] * scale;
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
        theta[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
      }
    };
    update(model_.weights(), grad_w, mw_, vw_);
    update(model_.bias(), grad_b, mb_, vb_);
    auto& layers = model_.encoder()->layer_params();
    const auto& frozen = model_.encoder()->frozen_mask();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (frozen[l]) continue;
      update(layers[l], grad_layers[l], ml_[l], vl_[l]);
    }
  }

  std::vector<double> grad_w, grad_b;
  std::vector<std::vector<double>> grad_layers;

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  LinearModel& model_;
  double lr_;
  long t_ = 0;
  std::vector<double> mw_, vw_, mb_, vb_;
  std::vector<std::vector<double>> ml_, vl_;
};

Trainer::Trainer(LinearModel& model, const TrainConfig& cfg) : model_(model), cfg_(cfg) {
  opt_ = std::make_unique<Optimizer>(model, cfg.learning_rate);
}

Trainer::~Trainer() = default;

double Trainer::run_epoch(std::vector<TrainItem*>& items,
                          Rng& rng, const std::function<void(int)>& step_hook) {
  rng.shuffle(items);
  double total_loss = 0;
  std::size_t n_batches = 0;
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  SparseVec dropped;
  for (std::size_t start = 0; start < items.size(); start += bs) {
    const std::size_t end = std::min(items.size(), start + bs);
    opt_->zero();
    for (std::size_t i = start; i < end; ++i) {
      const TrainItem& item = *items[i];
      const SparseVec* x = &item.features;
      if (cfg_.dropout > 0) {
        dropped.entries.clear();
        const double keep_scale = 1.0 / (1.0 - cfg_.dropout);
        for (const auto& e : item.features.entries) {
          if (rng.uniform() >= cfg_.dropout) {
            dropped.entries.emplace_back(e.first, e.second * keep_scale);
          }
        }
        x = &dropped;
      }
      total_loss += accumulate_loss_and_grad(model_, *x, item.targets, opt_->grad_w, opt_->grad_b,
                                             opt_->grad_layers);
    }
    opt_->step(end - start);
    ++n_batches;
    if (step_hook) step_hook(static_cast<int>(n_batches));
  }
  return items.empty() ? 0.0 : total_loss / static_cast<double>(items.size());
}

}  // namespace detail

std::pair<std::vector<std::string>, std::vector<std::string>> split_ids(
    const std::vector<LabeledSample>& ds, double validation_fraction, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(ds.size());
  for (const auto& ls : ds) ids.push_back(ls.sample.id);
  Rng rng(seed);
  rng.shuffle(ids);
  std::size_t n_val = 0;
  if (validation_fraction > 0 && ids.size() >= 2) {
    n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(static_cast<double>(ids.size()) * validation_fraction));
  }
  std::vector<std::string> val(ids.end() - static_cast<std::ptrdiff_t>(n_val), ids.end());
  ids.resize(ids.size() - n_val);
  return {std::move(ids), std::move(val)};
}

namespace {

double micro_f1_cells(const std::vector<std::pair<LabelVector, LabelVector>>& pred_gold) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [pred, gold] : pred_gold) {
    for (std::size_t i = 0; i < kNumDialects; ++i) {
      const bool p = pred.get(i);
      const bool g = gold.get(i);
      if (p && g) ++tp;
      else if (p && !g) ++fp;
      else if (!p && g) ++fn;
    }
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

struct Snapshot {
  std::vector<double> weights, bias;
  std::vector<std::vector<double>> layers;

  static Snapshot take(const LinearModel& m) {
    return {m.weights(), m.bias(), m.encoder()->layer_params()};
  }
  void restore(LinearModel& m) const {
    m.weights() = weights;
    m.bias() = bias;
    m.encoder()->layer_params() = layers;
  }
};

}  // namespace

double micro_f1(const LinearModel& model, const std::vector<LabeledSample>& ds, double threshold) {
  std::vector<std::pair<LabelVector, LabelVector>> pairs;
  pairs.reserve(ds.size());
  for (const auto& ls : ds) {
    pairs.emplace_back(predict(model, ls.sample, threshold), ls.labels);
  }
  return micro_f1_cells(pairs);
}

BinaryTrainResult train_binary(const BinaryDataset& ds, std::shared_ptr<Encoder> enc,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (ds.positives.empty() || ds.negatives.empty()) {
    throw DataError("train_binary requires both classes to be non-empty");
  }

  BinaryTrainResult result;
  result.scorer = LinearModel(enc, 1);

  std::vector<detail::TrainItem> items;
  items.reserve(ds.positives.size() + ds.negatives.size());
  auto add = [&](const Sample& s, double y) {
    detail::TrainItem item;
    item.id = s.id;
    item.features = enc->encode(s.text);
    item.targets = {y};
    items.push_back(std::move(item));
  };
  for (const auto& s : ds.positives) add(s, 1.0);
  for (const auto& s : ds.negatives) add(s, 0.0);

  const std::size_t n = items.size();
  const int steps_per_epoch =
      static_cast<int>((n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                       static_cast<std::size_t>(cfg.batch_size));
  int cadence = cfg.trace_cadence_fraction > 0
                    ? static_cast<int>(static_cast<double>(steps_per_epoch) *
                                       cfg.trace_cadence_fraction)
                    : cfg.trace_cadence_steps;
  if (cadence < 1) cadence = 1;
  if (cadence > steps_per_epoch) {
    std::cerr << "[mladi] warning: trace cadence " << cadence << " exceeds the "
              << steps_per_epoch << " step(s) per epoch; clamping so each epoch logs once\n";
    cadence = steps_per_epoch;
  }
  const int checkpoints_per_epoch = steps_per_epoch / cadence;

  result.trace.cadence_steps = cadence;
  result.trace.epochs = cfg.epochs;
  result.trace.warmup_epochs_ignored = 1;
  result.trace.checkpoints_per_epoch = checkpoints_per_epoch;
  result.trace.entries.reserve(n);
  for (const auto& item : items) {
    TraceEntry e;
    e.id = item.id;
    e.gold = item.targets[0] > 0.5 ? 1 : 0;
    result.trace.entries.push_back(std::move(e));
  }

  auto log_checkpoint = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(result.scorer.logits(items[i].features)[0]);
      result.trace.entries[i].probs.push_back(items[i].targets[0] > 0.5 ? p : 1.0 - p);
    }
  };

  detail::Trainer trainer(result.scorer, cfg);
  Rng rng(cfg.shuffle_seed);
  std::vector<detail::TrainItem*> ptrs;
  for (auto& item : items) ptrs.push_back(&item);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    int logged = 0;
    double loss = trainer.run_epoch(ptrs, rng, [&](int local_step) {
      if (local_step % cadence == 0 && logged < checkpoints_per_epoch) {
        log_checkpoint();
        ++logged;
      }
    });
    result.log.push_back({epoch, loss, 0.0});
  }
  result.trace.validate();
  return result;
}

MultilabelTrainResult train_multilabel(const std::vector<LabeledSample>& ds,
                                       std::shared_ptr<Encoder> enc, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.empty()) throw DataError("train_multilabel requires a non-empty dataset");
  std::size_t zero_card = 0;
  for (const auto& ls : ds) {
    if (ls.labels.cardinality() == 0) ++zero_card;
  }
  if (zero_card > 0) {
    throw DataError("dataset still contains " + std::to_string(zero_card) +
                    " zero-cardinality sample(s); run filter_zero_cardinality first");
  }

  enc->freeze_bottom(cfg.frozen_bottom_layers);

  MultilabelTrainResult result;
  result.model = LinearModel(enc, kNumDialects);

  auto [train_ids, val_ids] = split_ids(ds, cfg.validation_fraction, cfg.split_seed);
  result.train_ids = train_ids;
  result.val_ids = val_ids;
  std::unordered_set<std::string> val_set(val_ids.begin(), val_ids.end());

  std::vector<detail::TrainItem> items;
  std::vector<LabeledSample> val_samples;
  items.reserve(ds.size());
  for (const auto& ls : ds) {
    if (val_set.count(ls.sample.id)) {
      val_samples.push_back(ls);
      continue;
    }
    detail::TrainItem item;
    item.id = ls.sample.id;
    item.features = enc->encode(ls.sample.text);
    item.targets.resize(kNumDialects);
    for (std::size_t j = 0; j < kNumDialects; ++j) {
      item.targets[j] = ls.labels.get(j) ? 1.0 : 0.0;
    }
    items.push_back(std::move(item));
  }
  if (items.empty()) throw DataError("training split is empty");

  detail::Trainer trainer(result.model, cfg);
  Rng rng(cfg.shuffle_seed);
  std::vector<detail::TrainItem*> ptrs;
  for (auto& item : items) ptrs.push_back(&item);

  Snapshot best;
  result.best_epoch = 0;
  result.best_val_micro_f1 = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double loss = trainer.run_epoch(ptrs, rng);
    double val_f1 = 0;
    if (!val_samples.empty()) {
      val_f1 = micro_f1(result.model, val_samples, cfg.inference_threshold);
      if (val_f1 > result.best_val_micro_f1) {
        result.best_val_micro_f1 = val_f1;
        result.best_epoch = epoch;
        best = Snapshot::take(result.model);
      }
    }
    result.log.push_back({epoch, loss, val_f1});
  }
  if (val_samples.empty()) {
    result.best_epoch = cfg.epochs;
    result.best_val_micro_f1 = 0;
  } else {
    best.restore(result.model);
  }
  return result;
}

LabelVector predict(const LinearModel& model, const Sample& x, double threshold) {
  if (model.n_outputs() != kNumDialects) {
    throw DataError("predict requires the 18-output multi-label model");
  }
  auto probs = model.probabilities(x.text);
  LabelVector v;
  for (std::size_t j = 0; j < kNumDialects; ++j) {
    v.set(j, probs[j] >= threshold);
  }
  return v;
}

std::map<std::string, double> per_example_loss(const LinearModel& model,
                                               const std::vector<LabeledSample>& ds) {
  std::map<std::string, double> losses;
  for (const auto& ls : ds) {
    auto z = model.logits(ls.sample.text);
    double loss = 0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double y = (j < kNumDialects && ls.labels.get(j)) ? 1.0 : 0.0;
      loss += bce_with_logit(z[j], y);
    }
    losses[ls.sample.id] = loss / static_cast<double>(z.size());
  }
  return losses;
}

namespace {

constexpr char kParamsMagic[8] = {'M', 'L', 'A', 'D', 'I', 'M', 'D', 'L'};

void append_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

void append_doubles(std::string& out, const std::vector<double>& v) {
  append_u64(out, v.size());
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

std::uint64_t take_u64(const std::string& in, std::size_t& off) {
  if (off + 8 > in.size()) throw DataError("truncated params file");
  std::uint64_t v;
  std::memcpy(&v, in.data() + off, 8);
  off += 8;
  return v;
}

std::vector<double> take_doubles(const std::string& in, std::size_t& off) {
  const std::uint64_t n = take_u64(in, off);
  if (off + n * sizeof(double) > in.size()) throw DataError("truncated params file");
  std::vector<double> v(n);
  std::memcpy(v.data(), in.data() + off, n * sizeof(double));
  off += n * sizeof(double);
  return v;
}

}  // namespace

void save_model(const LinearModel& model, const std::filesystem::path& dir,
                const ModelCheckpointInfo& info) {
  std::filesystem::create_directories(dir);

  std::string params(kParamsMagic, sizeof(kParamsMagic));
  append_u64(params, 1);  // format version
  append_u64(params, model.n_outputs());
  append_u64(params, model.dim());
  append_doubles(params, model.weights());
  append_doubles(params, model.bias());
  const auto& layers = model.encoder()->layer_params();
  append_u64(params, layers.size());
  for (const auto& layer : layers) append_doubles(params, layer);
  atomic_write(dir / "params.bin", params);

  int frozen_prefix = 0;
  for (bool f : model.encoder()->frozen_mask()) {
    if (!f) break;
    ++frozen_prefix;
  }
  json manifest;
  manifest["kind"] = info.kind;
  manifest["encoder"] = model.encoder()->config();
  manifest["frozen_bottom_layers"] = frozen_prefix;
  manifest["train_config"] = info.config.to_json();
  manifest["optimizer"] = {{"name", "adam"},
                           {"learning_rate", info.config.learning_rate},
                           {"beta1", detail::Optimizer::kBeta1},
                           {"beta2", detail::Optimizer::kBeta2},
                           {"eps", detail::Optimizer::kEps}};
  manifest["metrics"] = info.metrics;
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

json load_model_manifest(const std::filesystem::path& dir) {
  return json::parse(read_file(dir / "manifest.json"));
}

LinearModel load_model(const std::filesystem::path& dir) {
  json manifest = load_model_manifest(dir);
  auto enc = ReferenceEncoder::from_config(manifest.at("encoder"));
  enc->freeze_bottom(
      std::min(manifest.value("frozen_bottom_layers", 0), enc->layer_count()));

  const std::string params = read_file(dir / "params.bin");
  if (params.size() < sizeof(kParamsMagic) ||
      std::memcmp(params.data(), kParamsMagic, sizeof(kParamsMagic)) != 0) {
    throw DataError(dir.string() + ": params.bin is not a model parameter file");
  }
  std::size_t off = sizeof(kParamsMagic);
  if (take_u64(params, off) != 1) throw DataError("unsupported params format version");
  const std::uint64_t n_outputs = take_u64(params, off);
  const std::uint64_t dim = take_u64(params, off);
  if (dim != enc->feature_dim()) throw DataError("params dim does not match encoder config");

  LinearModel model(enc, n_outputs);
  model.weights() = take_doubles(params, off);
  model.bias() = take_doubles(params, off);
  if (model.weights().size() != n_outputs * dim || model.bias().size() != n_outputs) {
    throw DataError("params file has inconsistent tensor sizes");
  }
  const std::uint64_t n_layers = take_u64(params, off);
  if (n_layers != enc->layer_params().size()) {
    throw DataError("params layer count does not match encoder config");
  }
  for (auto& layer : enc->layer_params()) {
    layer = take_doubles(params, off);
    if (layer.size() != dim) throw DataError("layer tensor has wrong size");
  }
  return model;
}

}  // namespace mladi
