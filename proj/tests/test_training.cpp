#include <catch2/catch_amalgamated.hpp>

#include "chroma/training.hpp"
#include "support/fixtures.hpp"
#include "support/reference_ops.hpp"

#include <cmath>

using namespace chroma;

namespace {

// Tiny model so the training unit tests stay fast.
ModelConfig tiny_config(uint64_t seed, NormKind norm = NormKind::batch, InputStage stage = InputStage::plain3) {
  ModelConfig cfg;
  cfg.conv_widths = {8, 12, 16};
  cfg.dense_widths = {48, 24};
  cfg.seed = seed;
  cfg.norm = norm;
  cfg.input_stage = stage;
  return cfg;
}

// Quadratic objective f(w) = w0^2 + 2*w1^2 with gradient (2w0, 4w1); the
// updates below are recomputed step by step in double precision.
struct QuadParams {
  Tensor w{std::vector<int64_t>{2}, std::vector<float>{1.0f, -1.0f}};
  Tensor g{std::vector<int64_t>{2}};
  std::vector<ParamRef> refs() { return {{"w", &w, &g}}; }
  void fill_grad() {
    g[0] = 2.0f * w[0];
    g[1] = 4.0f * w[1];
  }
};

}  // namespace

TEST_CASE("adam matches a hand-stepped reference on a quadratic", "[training]") {
  QuadParams p;
  Optimizer opt(OptimizerConfig::adam(0.1f));
  double w[2] = {1.0, -1.0}, m[2] = {0, 0}, v[2] = {0, 0};
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= 3; ++t) {
    p.fill_grad();
    opt.step(p.refs());
    const double grad[2] = {2.0 * w[0], 4.0 * w[1]};
    for (int i = 0; i < 2; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * grad[i];
      v[i] = b2 * v[i] + (1 - b2) * grad[i] * grad[i];
      const double mhat = m[i] / (1 - std::pow(b1, t));
      const double vhat = v[i] / (1 - std::pow(b2, t));
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    CHECK(p.w[0] == Catch::Approx(w[0]).margin(1e-6));
    CHECK(p.w[1] == Catch::Approx(w[1]).margin(1e-6));
  }
}

TEST_CASE("sgd with momentum matches a hand-stepped reference", "[training]") {
  QuadParams p;
  Optimizer opt(OptimizerConfig::sgd_momentum(0.05f, 0.9f));
  double w[2] = {1.0, -1.0}, vel[2] = {0, 0};
  for (int t = 1; t <= 3; ++t) {
    p.fill_grad();
    opt.step(p.refs());
    const double grad[2] = {2.0 * w[0], 4.0 * w[1]};
    for (int i = 0; i < 2; ++i) {
      vel[i] = 0.9 * vel[i] + grad[i];
      w[i] -= 0.05 * vel[i];
    }
    CHECK(p.w[0] == Catch::Approx(w[0]).margin(1e-6));
    CHECK(p.w[1] == Catch::Approx(w[1]).margin(1e-6));
  }
}

TEST_CASE("one small optimizer step decreases the batch loss", "[training]") {
  const auto& source = testsupport::mini_source();
  LabeledDataset train_set = build_dataset(source, "train", ColorScheme::GreenOnly, 42, testsupport::mini_options());
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Model model(tiny_config(seed));
    Optimizer opt(OptimizerConfig::adam(1e-4f));
    Rng rng = Rng::derive(0xBA7C4u, seed);
    std::vector<int64_t> idx(16);
    for (auto& i : idx) i = rng.uniform_u32(static_cast<uint32_t>(train_set.size()));
    std::vector<int> labels;
    Tensor x = make_batch(train_set, idx.data(), static_cast<int64_t>(idx.size()), &labels);

    SoftmaxCEResult before = softmax_cross_entropy(model.forward(x, Mode::train), labels);
    model.backward(before.grad_logits);
    opt.step(model.params());
    SoftmaxCEResult after = softmax_cross_entropy(model.forward(x, Mode::train), labels);
    CHECK(after.loss < before.loss);
  }
}

TEST_CASE("training memorizes a small subset", "[training]") {
  const auto& source = testsupport::mini_source();
  const auto opts = testsupport::mini_options();
  LabeledDataset train_set = build_dataset(source, "train", ColorScheme::GreenOnly, 42, opts).subset(200);
  LabeledDataset val_set = build_dataset(source, "val", ColorScheme::GreenOnly, 42, opts);

  Model model(tiny_config(1));
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 32;
  tc.shuffle_seed = 3;
  ModelSnapshot snap = train(model, train_set, val_set, tc);
  CHECK(snap.history.size() == 5);
  // training loss decreases from the first epoch to the best epoch
  CHECK(snap.history.back().train_loss < snap.history.front().train_loss);
  const EvalResult on_train = evaluate(model, train_set);
  CHECK(on_train.accuracy > 0.9);

  // best_val_accuracy is the max over history and reloading reproduces it
  double best = -1.0;
  for (const EpochStats& e : snap.history) best = std::max(best, e.val_accuracy);
  CHECK(snap.best_val_accuracy == best);
  const EvalResult revisit = evaluate(snap, val_set);
  CHECK(revisit.accuracy == snap.best_val_accuracy);
}

TEST_CASE("training is deterministic for fixed seeds", "[training]") {
  const auto& source = testsupport::mini_source();
  const auto opts = testsupport::mini_options();
  LabeledDataset train_set = build_dataset(source, "train", ColorScheme::RandomSingleChannel, 9, opts).subset(120);
  LabeledDataset val_set = build_dataset(source, "val", ColorScheme::RandomSingleChannel, 9, opts).subset(40);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 32;
  tc.shuffle_seed = 11;

  Model a(tiny_config(4));
  ModelSnapshot sa = train(a, train_set, val_set, tc);
  Model b(tiny_config(4));
  ModelSnapshot sb = train(b, train_set, val_set, tc);
  CHECK(sa.best_val_accuracy == sb.best_val_accuracy);
  REQUIRE(sa.tensors.size() == sb.tensors.size());
  for (size_t i = 0; i < sa.tensors.size(); ++i)
    CHECK(sa.tensors[i].second.values() == sb.tensors[i].second.values());
}

TEST_CASE("gray4 with forced mask trains identically across colorizations", "[training]") {
  const auto& source = testsupport::mini_source();
  const auto opts = testsupport::mini_options();
  LabeledDataset md1 = build_dataset(source, "train", ColorScheme::GreenOnly, 42, opts).subset(96);
  LabeledDataset md2 = build_dataset(source, "train", ColorScheme::RandomSingleChannel, 42, opts).subset(96);
  LabeledDataset val1 = build_dataset(source, "val", ColorScheme::GreenOnly, 42, opts).subset(32);
  LabeledDataset val2 = build_dataset(source, "val", ColorScheme::RandomSingleChannel, 42, opts).subset(32);

  ModelConfig cfg = tiny_config(8, NormKind::batch, InputStage::gray4);
  cfg.dropout.prob = 1.0f;  // the mask always fires, so only the gray channel survives
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 32;
  tc.shuffle_seed = 5;

  Model a(cfg);
  ModelSnapshot sa = train(a, md1, val1, tc);
  Model b(cfg);
  ModelSnapshot sb = train(b, md2, val2, tc);
  REQUIRE(sa.tensors.size() == sb.tensors.size());
  for (size_t i = 0; i < sa.tensors.size(); ++i)
    CHECK(sa.tensors[i].second.values() == sb.tensors[i].second.values());
  for (size_t e = 0; e < sa.history.size(); ++e) {
    CHECK(sa.history[e].train_loss == sb.history[e].train_loss);
    CHECK(sa.history[e].val_accuracy == sb.history[e].val_accuracy);
  }
}

TEST_CASE("evaluate on an all-zero model predicts the first class everywhere", "[training]") {
  const auto& source = testsupport::mini_source();
  LabeledDataset test_set = build_dataset(source, "test", ColorScheme::GreenOnly, 2, testsupport::mini_options());
  Model model(tiny_config(3));
  for (const ParamRef& p : model.params())
    for (int64_t i = 0; i < p.value->size(); ++i) (*p.value)[i] = 0.0f;
  EvalResult r = evaluate(model, test_set);
  int64_t zeros = 0;
  for (const PerExample& rec : r.records) {
    CHECK(rec.prediction == 0);
    CHECK(rec.max_prob == Catch::Approx(0.1).margin(1e-5));
    if (rec.label == 0) ++zeros;
  }
  CHECK(r.accuracy == Catch::Approx(static_cast<double>(zeros) / test_set.size()).margin(1e-12));
}

TEST_CASE("an untrained model sits at chance accuracy", "[training]") {
  const auto& source = testsupport::mini_source();
  LabeledDataset test_set = build_dataset(source, "test", ColorScheme::GreenOnly, 2, testsupport::mini_options());
  double total = 0.0;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    Model model(tiny_config(100 + seed));
    total += evaluate(model, test_set).accuracy;
  }
  CHECK(total / 4.0 == Catch::Approx(0.1).margin(0.05));
}

TEST_CASE("train validates its inputs", "[training]") {
  const auto& source = testsupport::mini_source();
  const auto opts = testsupport::mini_options();
  LabeledDataset train_set = build_dataset(source, "train", ColorScheme::GreenOnly, 42, opts).subset(64);
  LabeledDataset val_set = build_dataset(source, "val", ColorScheme::GreenOnly, 42, opts).subset(16);
  Model model(tiny_config(1));
  TrainConfig tc;
  tc.epochs = 0;
  CHECK_THROWS_AS(train(model, train_set, val_set, tc), std::invalid_argument);
  tc.epochs = 1;
  tc.batch_size = 1;  // batch norm needs at least two samples worth of statistics
  CHECK_THROWS_AS(train(model, train_set, val_set, tc), std::invalid_argument);
}
