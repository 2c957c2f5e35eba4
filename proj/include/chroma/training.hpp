#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "chroma/datagen.hpp"
#include "chroma/model.hpp"

namespace chroma {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Optimizers. State is held per parameter, keyed by position in the model's
// parameter list, which is stable for a given architecture.

struct OptimizerConfig {
  enum class Kind { adam, sgd_momentum };
  Kind kind = Kind::adam;
  float lr = 1e-3f;
  float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;  // adam
  float momentum = 0.9f;                            // sgd_momentum

  static OptimizerConfig adam(float lr = 1e-3f, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f) {
    return {Kind::adam, lr, beta1, beta2, eps, 0.0f};
  }
  static OptimizerConfig sgd_momentum(float lr, float momentum = 0.9f) {
    return {Kind::sgd_momentum, lr, 0.0f, 0.0f, 0.0f, momentum};
  }
};

class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& config) : cfg_(config) {}

  void step(const std::vector<ParamRef>& params) {
    if (state_m_.empty()) {
      state_m_.resize(params.size());
      state_v_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        state_m_[i].assign(static_cast<size_t>(params[i].value->size()), 0.0f);
        if (cfg_.kind == OptimizerConfig::Kind::adam)
          state_v_[i].assign(static_cast<size_t>(params[i].value->size()), 0.0f);
      }
    }
    ++t_;
    if (cfg_.kind == OptimizerConfig::Kind::adam) {
      const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
      const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
      for (size_t i = 0; i < params.size(); ++i) {
        float* w = params[i].value->data();
        const float* g = params[i].grad->data();
        float* m = state_m_[i].data();
        float* v = state_v_[i].data();
        const int64_t n = params[i].value->size();
        for (int64_t j = 0; j < n; ++j) {
          m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * g[j];
          v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * g[j] * g[j];
          const float mhat = m[j] / bc1;
          const float vhat = v[j] / bc2;
          w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
      }
    } else {
      for (size_t i = 0; i < params.size(); ++i) {
        float* w = params[i].value->data();
        const float* g = params[i].grad->data();
        float* m = state_m_[i].data();
        const int64_t n = params[i].value->size();
        for (int64_t j = 0; j < n; ++j) {
          m[j] = cfg_.momentum * m[j] + g[j];
          w[j] -= cfg_.lr * m[j];
        }
      }
    }
  }

  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  int64_t t_ = 0;
  std::vector<std::vector<float>> state_m_, state_v_;
};

// ---------------------------------------------------------------------------
// Batch assembly: u8 pixels scaled to [0,1] floats.

inline Tensor make_batch(const LabeledDataset& ds, const int64_t* indices, int64_t count,
                         std::vector<int>* labels_out) {
  Tensor x({count, LabeledDataset::kChannels, LabeledDataset::kHeight, LabeledDataset::kWidth});
  if (labels_out) labels_out->resize(static_cast<size_t>(count));
  constexpr float kScale = 1.0f / 255.0f;
  for (int64_t b = 0; b < count; ++b) {
    const uint8_t* img = ds.image(indices[b]);
    float* dst = x.data() + b * LabeledDataset::kImageBytes;
    for (int64_t i = 0; i < LabeledDataset::kImageBytes; ++i) dst[i] = static_cast<float>(img[i]) * kScale;
    if (labels_out) (*labels_out)[static_cast<size_t>(b)] = ds.labels[static_cast<size_t>(indices[b])];
  }
  return x;
}

// ---------------------------------------------------------------------------
// Evaluation: eval mode throughout (running stats for batch norm, dropout
// passes everything). Deterministic for a fixed dataset.

struct PerExample {
  uint8_t label = 0;
  uint8_t prediction = 0;
  float max_prob = 0.0f;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<PerExample> records;
};

inline EvalResult evaluate(Model& model, const LabeledDataset& ds, int64_t batch_size = 256) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  EvalResult res;
  res.records.reserve(static_cast<size_t>(ds.size()));
  std::vector<int64_t> indices(static_cast<size_t>(ds.size()));
  std::iota(indices.begin(), indices.end(), 0);
  int64_t correct = 0;
  for (int64_t start = 0; start < ds.size(); start += batch_size) {
    const int64_t count = std::min(batch_size, ds.size() - start);
    Tensor x = make_batch(ds, indices.data() + start, count, nullptr);
    Tensor probs = softmax_rows(model.forward(x, Mode::eval));
    const int64_t k = probs.dim(1);
    for (int64_t b = 0; b < count; ++b) {
      const float* row = probs.data() + b * k;
      int64_t arg = 0;
      for (int64_t j = 1; j < k; ++j)
        if (row[j] > row[arg]) arg = j;
      PerExample rec;
      rec.label = ds.labels[static_cast<size_t>(start + b)];
      rec.prediction = static_cast<uint8_t>(arg);
      rec.max_prob = row[arg];
      if (rec.prediction == rec.label) ++correct;
      res.records.push_back(rec);
    }
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
  return res;
}

inline EvalResult evaluate(const ModelSnapshot& snap, const LabeledDataset& ds, int64_t batch_size = 256) {
  Model model = restore_model(snap);
  return evaluate(model, ds, batch_size);
}

// ---------------------------------------------------------------------------
// Training loop with per-epoch validation checkpointing.

struct TrainConfig {
  int epochs = 50;
  int64_t batch_size = 128;
  OptimizerConfig optimizer = OptimizerConfig::adam();
  uint64_t shuffle_seed = 0;
  std::ostream* log = nullptr;  // per-epoch progress lines when set
};

// Trains in place and returns a snapshot of the best-validation-accuracy
// epoch (ties resolve to the earliest). Throws TrainingError with epoch,
// batch and loss when the loss leaves the finite range.
inline ModelSnapshot train(Model& model, const LabeledDataset& train_set, const LabeledDataset& val_set,
                           const TrainConfig& config) {
  if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (train_set.size() == 0 || val_set.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (model.config().norm == NormKind::batch && config.batch_size < 2)
    throw std::invalid_argument("train: batch norm requires batch_size >= 2");

  Optimizer opt(config.optimizer);
  const std::vector<ParamRef> params = model.params();
  ModelSnapshot best;
  best.config = model.config();
  best.trained_on = train_set.id();
  best.best_val_accuracy = -1.0;

  std::vector<int64_t> order(static_cast<size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> labels;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffler = Rng::derive(config.shuffle_seed, static_cast<uint64_t>(epoch));
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    int64_t seen = 0;
    int64_t batch_index = 0;
    for (int64_t start = 0; start < train_set.size(); start += config.batch_size, ++batch_index) {
      const int64_t count = std::min(config.batch_size, train_set.size() - start);
      Tensor x = make_batch(train_set, order.data() + start, count, &labels);
      Tensor logits = model.forward(x, Mode::train);
      SoftmaxCEResult ce = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(ce.loss))
        throw TrainingError("non-finite loss " + std::to_string(ce.loss) + " at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_index));
      model.backward(ce.grad_logits);
      opt.step(params);
      loss_sum += ce.loss * static_cast<double>(count);
      seen += count;
    }
    const double train_loss = loss_sum / static_cast<double>(seen);
    const double val_acc = evaluate(model, val_set).accuracy;
    best.history.push_back({epoch, train_loss, val_acc});
    if (config.log)
      (*config.log) << "epoch " << epoch << " train_loss " << train_loss << " val_acc " << val_acc << std::endl;
    if (val_acc > best.best_val_accuracy) {
      best.best_val_accuracy = val_acc;
      best.epoch_of_best = epoch;
      best.tensors.clear();
      for (const ParamRef& p : model.params()) best.tensors.emplace_back(p.name, *p.value);
      for (const ParamRef& b : model.buffers()) best.tensors.emplace_back(b.name, *b.value);
    }
  }
  return best;
}

}  // namespace chroma
