#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mladi/errors.hpp"
#include "mladi/rng.hpp"
#include "mladi/trainer.hpp"
#include "test_util.hpp"

using namespace mladi;
using mladi::test::TempDir;
using mladi::test::make_sample;

namespace {

std::shared_ptr<ReferenceEncoder> small_encoder(int layers = 1, std::size_t buckets = 256) {
  ReferenceEncoderConfig cfg;
  cfg.buckets = buckets;
  cfg.layers = layers;
  return std::make_shared<ReferenceEncoder>(cfg);
}

TrainConfig fast_config() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.dropout = 0;
  cfg.learning_rate = 0.1;
  cfg.frozen_bottom_layers = 0;
  cfg.trace_cadence_fraction = 0.2;
  return cfg;
}

// Two well-separated token families: texts with "aaaa" are positive.
BinaryDataset separable_binary(int n_per_class) {
  BinaryDataset ds;
  ds.dialect = *DialectLabel::from_code("EG");
  for (int i = 0; i < n_per_class; ++i) {
    ds.positives.push_back(
        make_sample("p" + std::to_string(i), "aaaa pad" + std::to_string(i % 7), "EG", 0.9));
    ds.negatives.push_back(
        make_sample("n" + std::to_string(i), "zzzz pad" + std::to_string(i % 7), "MA", 0.9));
  }
  return ds;
}

// Each sample carries its dialect's marker token; labels are one-hot.
std::vector<LabeledSample> separable_multilabel(int per_dialect) {
  std::vector<LabeledSample> ds;
  for (std::size_t d = 0; d < kNumDialects; ++d) {
    for (int i = 0; i < per_dialect; ++i) {
      LabeledSample ls;
      ls.sample = make_sample(std::string(kDialectCodes[d]) + std::to_string(i),
                              "tok_" + std::string(kDialectCodes[d]) + " filler" +
                                  std::to_string(i % 5),
                              std::string(kDialectCodes[d]).c_str(), 0.9);
      ls.labels.set(d, true);
      ls.provenance = Provenance::kGold;
      ds.push_back(std::move(ls));
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("reference encoder is deterministic and L2-normalized") {
  auto enc = small_encoder();
  auto a = enc->encode("the same text");
  auto b = enc->encode("the same text");
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i] == b.entries[i]);
  }
  double norm = 0;
  for (const auto& [idx, v] : a.entries) norm += v * v;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("BCE gradients match central finite differences") {
  Rng rng(41);
  const double fd_eps = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    auto enc = small_encoder(/*layers=*/2, /*buckets=*/32);
    const std::size_t n_out = 1 + rng.bounded(3);
    LinearModel model(enc, n_out);
    for (auto& w : model.weights()) w = rng.uniform() - 0.5;
    for (auto& b : model.bias()) b = rng.uniform() - 0.5;
    for (auto& layer : enc->layer_params()) {
      for (auto& s : layer) s = 0.5 + rng.uniform();
    }
    const std::string text = "sample text " + std::to_string(trial);
    const SparseVec x = enc->encode(text);
    std::vector<double> targets(n_out);
    for (auto& t : targets) t = rng.bounded(2) ? 1.0 : 0.0;

    std::vector<double> gw, gb;
    std::vector<std::vector<double>> glayers;
    detail::loss_and_grad(model, x, targets, gw, gb, glayers);

    auto loss_at = [&]() {
      std::vector<double> tmp_w, tmp_b;
      std::vector<std::vector<double>> tmp_l;
      return detail::loss_and_grad(model, x, targets, tmp_w, tmp_b, tmp_l);
    };
    auto check_grad = [&](double& param, double analytic) {
      const double orig = param;
      param = orig + fd_eps;
      const double up = loss_at();
      param = orig - fd_eps;
      const double down = loss_at();
      param = orig;
      const double numeric = (up - down) / (2 * fd_eps);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      CHECK(std::abs(analytic - numeric) / denom < 1e-4);
    };

    // Probe the touched weight entries plus every bias and layer scale.
    for (const auto& [idx, value] : x.entries) {
      for (std::size_t j = 0; j < n_out; ++j) {
        check_grad(model.weights()[j * model.dim() + idx], gw[j * model.dim() + idx]);
      }
      for (std::size_t l = 0; l < glayers.size(); ++l) {
        check_grad(enc->layer_params()[l][idx], glayers[l][idx]);
      }
    }
    for (std::size_t j = 0; j < n_out; ++j) check_grad(model.bias()[j], gb[j]);
  }
}

TEST_CASE("per-example loss has its closed-form values") {
  auto enc = small_encoder();
  LinearModel model(enc, 2);

  LabeledSample ls;
  ls.sample = make_sample("a", "text", "EG", 0.5);
  ls.labels.set(0, true);

  SUBCASE("all-logit-zero model predicts 0.5 everywhere: loss = ln 2") {
    LinearModel wide(enc, kNumDialects);
    auto losses = per_example_loss(wide, {ls});
    CHECK(losses.at("a") == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("hand-computed two-label case") {
    // p = (0.9, 0.2) against y = (1, 0): loss = -(ln 0.9 + ln 0.8) / 2
    const double z0 = std::log(0.9 / 0.1);
    const double z1 = std::log(0.2 / 0.8);
    const double expected = -(std::log(0.9) + std::log(0.8)) / 2.0;
    CHECK((bce_with_logit(z0, 1.0) + bce_with_logit(z1, 0.0)) / 2.0 ==
          doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("confident correct predictions approach zero loss") {
    auto ds = separable_multilabel(6);
    auto cfg = fast_config();
    cfg.epochs = 12;
    cfg.validation_fraction = 0;
    auto result = train_multilabel(ds, small_encoder(1, 1u << 12), cfg);
    auto losses = per_example_loss(result.model, ds);
    double total = 0;
    for (const auto& [id, loss] : losses) total += loss;
    CHECK(total / static_cast<double>(losses.size()) < 0.1);
  }
}

TEST_CASE("train_binary logs checkpoints-per-epoch x epochs probabilities") {
  auto ds = separable_binary(20);  // 40 samples, batch 8 -> 5 steps/epoch
  auto cfg = fast_config();
  cfg.epochs = 5;
  cfg.trace_cadence_fraction = 0.2;  // cadence 1: 5 checkpoints per epoch
  auto result = train_binary(ds, small_encoder(), cfg);
  CHECK(result.trace.checkpoints_per_epoch == 5);
  for (const auto& e : result.trace.entries) {
    CHECK(e.probs.size() == 25);
  }
}

TEST_CASE("train_binary fits linearly separable data") {
  auto ds = separable_binary(30);
  auto cfg = fast_config();
  cfg.epochs = 5;
  auto result = train_binary(ds, small_encoder(1, 1u << 12), cfg);
  auto records = compute_metrics(result.trace);
  std::size_t perfect_final = 0;
  for (const auto& e : result.trace.entries) {
    // final-epoch correctness: all last-epoch checkpoints above 0.5
    const std::size_t cpe = static_cast<std::size_t>(result.trace.checkpoints_per_epoch);
    bool ok = true;
    for (std::size_t i = e.probs.size() - cpe; i < e.probs.size(); ++i) {
      ok = ok && e.probs[i] > 0.5;
    }
    perfect_final += ok;
  }
  CHECK(static_cast<double>(perfect_final) >=
        0.95 * static_cast<double>(result.trace.entries.size()));
  CHECK(records.size() == result.trace.entries.size());
}

TEST_CASE("train_binary is deterministic given the seeds") {
  auto ds = separable_binary(12);
  auto cfg = fast_config();
  auto a = train_binary(ds, small_encoder(), cfg);
  auto b = train_binary(ds, small_encoder(), cfg);
  REQUIRE(a.trace.entries.size() == b.trace.entries.size());
  for (std::size_t i = 0; i < a.trace.entries.size(); ++i) {
    CHECK(a.trace.entries[i].probs == b.trace.entries[i].probs);
  }
  CHECK(a.scorer.weights() == b.scorer.weights());
}

TEST_CASE("train_binary rejects single-class datasets") {
  BinaryDataset ds;
  ds.dialect = *DialectLabel::from_code("EG");
  ds.positives.push_back(make_sample("p", "text", "EG", 0.9));
  CHECK_THROWS_AS(train_binary(ds, small_encoder(), fast_config()), DataError);
}

TEST_CASE("frozen layer groups stay byte-identical through training") {
  auto enc = small_encoder(/*layers=*/4, 1u << 10);
  auto cfg = fast_config();
  cfg.frozen_bottom_layers = 2;
  cfg.epochs = 3;
  auto ds = separable_multilabel(4);

  auto result = train_multilabel(ds, enc, cfg);
  const auto& layers = result.model.encoder()->layer_params();
  std::vector<double> ones(1u << 10, 1.0);
  for (int l = 0; l < 2; ++l) {
    CHECK(std::memcmp(layers[static_cast<std::size_t>(l)].data(), ones.data(),
                      ones.size() * sizeof(double)) == 0);
  }
  // the unfrozen stack must have actually moved
  bool moved = false;
  for (std::size_t l = 2; l < layers.size(); ++l) {
    moved = moved || layers[l] != ones;
  }
  CHECK(moved);
}

TEST_CASE("freezing more layers than the encoder has warns and no-ops") {
  auto enc = small_encoder(/*layers=*/1);
  CHECK_FALSE(enc->freeze_bottom(8));
  for (bool frozen : enc->frozen_mask()) CHECK_FALSE(frozen);
  CHECK(enc->freeze_bottom(1));
  CHECK(enc->frozen_mask()[0]);
}

TEST_CASE("the best validation checkpoint is kept, earliest epoch on ties") {
  auto ds = separable_multilabel(6);
  auto cfg = fast_config();
  cfg.epochs = 4;
  cfg.validation_fraction = 0.2;
  auto result = train_multilabel(ds, small_encoder(1, 1u << 12), cfg);

  REQUIRE(result.log.size() == 4);
  double best = -1;
  int best_epoch = 0;
  for (const auto& e : result.log) {
    if (e.val_micro_f1 > best) {
      best = e.val_micro_f1;
      best_epoch = e.epoch;
    }
  }
  CHECK(result.best_epoch == best_epoch);
  CHECK(result.best_val_micro_f1 == best);

  // The returned model scores exactly the recorded best on the same split.
  std::vector<LabeledSample> val;
  for (const auto& ls : ds) {
    for (const auto& id : result.val_ids) {
      if (ls.sample.id == id) val.push_back(ls);
    }
  }
  CHECK(micro_f1(result.model, val, cfg.inference_threshold) ==
        doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("train_multilabel reaches high micro F1 on separable data") {
  auto ds = separable_multilabel(10);
  auto cfg = fast_config();
  cfg.epochs = 6;
  cfg.validation_fraction = 0.1;
  auto result = train_multilabel(ds, small_encoder(1, 1u << 13), cfg);
  CHECK(result.best_val_micro_f1 >= 0.95);
}

TEST_CASE("train_multilabel refuses zero-cardinality rows") {
  auto ds = separable_multilabel(2);
  ds.push_back({make_sample("zero", "text", "EG", 0.5), LabelVector{}, Provenance::kHybrid, ""});
  CHECK_THROWS_WITH_AS(train_multilabel(ds, small_encoder(), fast_config()),
                       doctest::Contains("zero-cardinality"), DataError);
}

TEST_CASE("predict thresholds sigmoids with >= and is monotone in the threshold") {
  auto enc = small_encoder();
  LinearModel model(enc, kNumDialects);
  // Bias-only model: set chosen sigmoid values directly.
  auto logit_for = [](double p) { return std::log(p / (1.0 - p)); };
  model.bias()[0] = logit_for(0.31);
  model.bias()[1] = logit_for(0.29);
  model.bias()[2] = 0.0;  // sigmoid 0.5
  const auto x = make_sample("x", "anything", "EG", 0.5);

  auto v = predict(model, x, 0.3);
  CHECK(v.get(std::size_t{0}));
  CHECK_FALSE(v.get(std::size_t{1}));
  CHECK(v.get(std::size_t{2}));

  SUBCASE("all high sigmoids -> all ones") {
    for (auto& b : model.bias()) b = logit_for(0.999);
    CHECK(predict(model, x, 0.3) == LabelVector::all_ones());
  }
  SUBCASE("0.3-set contains the 0.5-set on random logits") {
    Rng rng(53);
    for (int trial = 0; trial < 1000; ++trial) {
      for (auto& b : model.bias()) b = (rng.uniform() - 0.5) * 8;
      auto low = predict(model, x, 0.3);
      auto high = predict(model, x, 0.5);
      for (std::size_t j = 0; j < kNumDialects; ++j) {
        if (high.get(j)) CHECK(low.get(j));
      }
    }
  }
}

TEST_CASE("model checkpoints round-trip through save/load") {
  TempDir tmp("ckpt");
  auto ds = separable_multilabel(3);
  auto cfg = fast_config();
  cfg.epochs = 2;
  auto enc = small_encoder(2, 1u << 10);
  enc->freeze_bottom(1);
  auto result = train_multilabel(ds, enc, cfg);

  ModelCheckpointInfo info;
  info.kind = "multilabel";
  info.config = cfg;
  info.metrics = {{"best_epoch", result.best_epoch}};
  save_model(result.model, tmp.path(), info);

  auto loaded = load_model(tmp.path());
  CHECK(loaded.n_outputs() == kNumDialects);
  CHECK(loaded.weights() == result.model.weights());
  CHECK(loaded.bias() == result.model.bias());
  CHECK(loaded.encoder()->layer_params() == result.model.encoder()->layer_params());
  const auto x = make_sample("x", "tok_EG filler1", "EG", 0.9);
  CHECK(predict(loaded, x, 0.3) == predict(result.model, x, 0.3));
}

TEST_CASE("fixed seeds give identical checkpoint files") {
  TempDir tmp("det");
  auto ds = separable_multilabel(4);
  auto cfg = fast_config();
  cfg.epochs = 2;
  for (const char* name : {"a", "b"}) {
    auto result = train_multilabel(ds, small_encoder(), cfg);
    ModelCheckpointInfo info;
    info.kind = "multilabel";
    info.config = cfg;
    save_model(result.model, tmp / name, info);
  }
  CHECK(read_file(tmp / "a" / "params.bin") == read_file(tmp / "b" / "params.bin"));
}
