#pragma once

#include <json.hpp>

#include <array>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "chroma/binio.hpp"
#include "chroma/layers.hpp"
#include "chroma/rng.hpp"

namespace chroma {

enum class InputStage { plain3, gray4 };

inline const char* input_stage_name(InputStage s) { return s == InputStage::plain3 ? "plain3" : "gray4"; }

struct ModelConfig {
  std::array<int64_t, 3> conv_widths = {32, 64, 128};
  std::array<int64_t, 2> dense_widths = {512, 256};
  int64_t classes = 10;
  NormKind norm = NormKind::batch;
  InputStage input_stage = InputStage::plain3;
  CustomDropoutConfig dropout;
  uint64_t seed = 0;
  float norm_eps = 1e-5f;
  float bn_momentum = 0.1f;
  int64_t image_size = 32;  // square input, three color channels
};

inline NormKind norm_kind_from_name(const std::string& s) {
  if (s == "batch") return NormKind::batch;
  if (s == "layer") return NormKind::layer;
  if (s == "instance") return NormKind::instance;
  if (s == "none") return NormKind::none;
  throw std::invalid_argument("unknown normalization kind: " + s);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"conv_widths", c.conv_widths},
                     {"dense_widths", c.dense_widths},
                     {"classes", c.classes},
                     {"norm", norm_kind_name(c.norm)},
                     {"input_stage", input_stage_name(c.input_stage)},
                     {"dropout",
                      {{"prob", c.dropout.prob},
                       {"gray_weights", c.dropout.gray_weights},
                       {"per_sample", c.dropout.per_sample}}},
                     {"seed", c.seed},
                     {"norm_eps", c.norm_eps},
                     {"bn_momentum", c.bn_momentum},
                     {"image_size", c.image_size}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("conv_widths").get_to(c.conv_widths);
  j.at("dense_widths").get_to(c.dense_widths);
  j.at("classes").get_to(c.classes);
  c.norm = norm_kind_from_name(j.at("norm").get<std::string>());
  c.input_stage = j.at("input_stage").get<std::string>() == "gray4" ? InputStage::gray4 : InputStage::plain3;
  j.at("dropout").at("prob").get_to(c.dropout.prob);
  j.at("dropout").at("gray_weights").get_to(c.dropout.gray_weights);
  j.at("dropout").at("per_sample").get_to(c.dropout.per_sample);
  j.at("seed").get_to(c.seed);
  j.at("norm_eps").get_to(c.norm_eps);
  j.at("bn_momentum").get_to(c.bn_momentum);
  j.at("image_size").get_to(c.image_size);
}

// The classifier stack:
//   [gray concat -> channel dropout]            (gray4 input stage only)
//   (conv 3x3 same -> norm -> relu -> maxpool) x3
//   flatten -> dense -> relu -> dense -> relu -> decision dense
// Logits go to softmax_cross_entropy during training and softmax_rows during
// evaluation.
class Model {
 public:
  explicit Model(const ModelConfig& config) : config_(config) {
    for (int64_t w : config.conv_widths)
      if (w <= 0) throw std::invalid_argument("model: conv widths must be positive");
    for (int64_t w : config.dense_widths)
      if (w <= 0) throw std::invalid_argument("model: dense widths must be positive");
    if (config.classes <= 0) throw std::invalid_argument("model: classes must be positive");
    if (config.image_size % 8 != 0)
      throw std::invalid_argument("model: image size must be divisible by 8 (three 2x2 pools)");

    int64_t in_channels = 3;
    if (config.input_stage == InputStage::gray4) {
      push("gray", std::make_unique<GrayscaleConcat>(config.dropout.gray_weights));
      push("drop", std::make_unique<ChannelDropout>(config.dropout.prob, config.seed, config.dropout.per_sample));
      in_channels = 4;
    }
    const char* norm_prefix = config.norm == NormKind::layer     ? "ln"
                              : config.norm == NormKind::instance ? "in"
                                                                  : "bn";
    int64_t channels = in_channels;
    for (int block = 0; block < 3; ++block) {
      const int64_t width = config.conv_widths[static_cast<size_t>(block)];
      push("conv" + std::to_string(block + 1), std::make_unique<Conv2d>(channels, width));
      if (config.norm != NormKind::none)
        push(norm_prefix + std::to_string(block + 1),
             std::make_unique<Normalization>(config.norm, width, config.norm_eps, config.bn_momentum));
      push("relu", std::make_unique<ReLU>());
      push("pool", std::make_unique<MaxPool2x2>());
      channels = width;
    }
    push("flatten", std::make_unique<Flatten>());
    const int64_t spatial = config.image_size / 8;
    int64_t features = channels * spatial * spatial;
    for (int i = 0; i < 2; ++i) {
      const int64_t width = config.dense_widths[static_cast<size_t>(i)];
      push("dense" + std::to_string(i + 1), std::make_unique<Dense>(features, width));
      push("relu", std::make_unique<ReLU>());
      features = width;
    }
    push("dense3", std::make_unique<Dense>(features, config.classes));
    init_weights();
  }

  Tensor forward(const Tensor& x, Mode mode) {
    Tensor cur = x;
    for (auto& [name, layer] : stack_) cur = layer->forward(cur, mode);
    return cur;
  }

  void backward(const Tensor& grad_logits) {
    Tensor g = grad_logits;
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) g = it->second->backward(g);
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (auto& [name, layer] : stack_) layer->collect_params(name, out);
    return out;
  }

  std::vector<ParamRef> buffers() {
    std::vector<ParamRef> out;
    for (auto& [name, layer] : stack_) layer->collect_buffers(name, out);
    return out;
  }

  int64_t param_count() {
    int64_t n = 0;
    for (const ParamRef& p : params()) n += p.value->size();
    return n;
  }

  const ModelConfig& config() const { return config_; }

  // layer access for tests and inspection
  const std::vector<std::pair<std::string, std::unique_ptr<Layer>>>& layers() const { return stack_; }

 private:
  void push(std::string name, std::unique_ptr<Layer> layer) { stack_.emplace_back(std::move(name), std::move(layer)); }

  // He (fan-in, normal) initialization for conv and dense weights, zero
  // biases. Normalization affines start at gamma=1, beta=0 and running stats
  // at (0, 1), set in their constructors. A fixed seed fixes every weight.
  void init_weights() {
    Rng rng = Rng::derive(config_.seed, 0x1417u);
    for (auto& [name, layer] : stack_) {
      if (auto* conv = dynamic_cast<Conv2d*>(layer.get())) {
        const int64_t fan_in = conv->weight().dim(1) * 9;
        const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
        for (int64_t i = 0; i < conv->weight().size(); ++i) conv->weight()[i] = rng.normal(0.0f, stddev);
      } else if (auto* dense = dynamic_cast<Dense*>(layer.get())) {
        const int64_t fan_in = dense->weight().dim(0);
        const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
        for (int64_t i = 0; i < dense->weight().size(); ++i) dense->weight()[i] = rng.normal(0.0f, stddev);
      }
    }
  }

  ModelConfig config_;
  std::vector<std::pair<std::string, std::unique_ptr<Layer>>> stack_;
};

inline Model build_model(const ModelConfig& config) { return Model(config); }

// ---------------------------------------------------------------------------
// Snapshot ("CMSN"): JSON manifest + named tensor blobs + CRC32 trailer.

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct ModelSnapshot {
  ModelConfig config;
  std::string model_id;
  std::string trained_on;  // dataset id of the training set
  double best_val_accuracy = 0.0;
  int epoch_of_best = 0;
  std::vector<EpochStats> history;
  std::vector<std::pair<std::string, Tensor>> tensors;  // params then buffers, stack order
};

inline ModelSnapshot capture_snapshot(Model& model) {
  ModelSnapshot snap;
  snap.config = model.config();
  for (const ParamRef& p : model.params()) snap.tensors.emplace_back(p.name, *p.value);
  for (const ParamRef& b : model.buffers()) snap.tensors.emplace_back(b.name, *b.value);
  return snap;
}

// Overwrites a freshly built model's parameters and buffers from a snapshot.
inline Model restore_model(const ModelSnapshot& snap) {
  Model model(snap.config);
  std::vector<ParamRef> slots = model.params();
  for (const ParamRef& b : model.buffers()) slots.push_back(b);
  if (slots.size() != snap.tensors.size())
    throw FormatError("snapshot: expected " + std::to_string(slots.size()) + " tensors, found " +
                      std::to_string(snap.tensors.size()));
  for (size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].name != snap.tensors[i].first)
      throw FormatError("snapshot: tensor \"" + snap.tensors[i].first + "\" does not match model slot \"" +
                        slots[i].name + "\"");
    if (!slots[i].value->same_shape(snap.tensors[i].second))
      throw FormatError("snapshot: shape mismatch for " + slots[i].name);
    *slots[i].value = snap.tensors[i].second;
  }
  return model;
}

inline nlohmann::json snapshot_manifest(const ModelSnapshot& snap) {
  nlohmann::json history = nlohmann::json::array();
  for (const EpochStats& e : snap.history)
    history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}});
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : snap.tensors) tensors.push_back({{"name", name}, {"shape", t.shape()}});
  return nlohmann::json{{"format", "cmsn"},          {"version", 1},
                        {"config", snap.config},     {"model_id", snap.model_id},
                        {"trained_on", snap.trained_on}, {"best_val_accuracy", snap.best_val_accuracy},
                        {"epoch_of_best", snap.epoch_of_best}, {"history", history},
                        {"tensors", tensors}};
}

inline void save_snapshot(const ModelSnapshot& snap, const std::string& path) {
  std::ostringstream body;
  const std::string manifest = snapshot_manifest(snap).dump();
  binio::put_u32le(body, static_cast<uint32_t>(manifest.size()));
  body.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  binio::put_u32le(body, static_cast<uint32_t>(snap.tensors.size()));
  for (const auto& [name, t] : snap.tensors) {
    binio::put_u32le(body, static_cast<uint32_t>(name.size()));
    body.write(name.data(), static_cast<std::streamsize>(name.size()));
    binio::put_u32le(body, static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) binio::put_u32le(body, static_cast<uint32_t>(d));
    static_assert(std::endian::native == std::endian::little, "tensor payload assumes little-endian host");
    body.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 4));
  }
  const std::string bytes = body.str();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path);
  os.write("CMSN", 4);
  binio::put_u16le(os, 1);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  binio::put_u32le(os, crc32(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size()));
  if (!os) throw FormatError("write failure on " + path);
}

inline ModelSnapshot load_snapshot(const std::string& path) {
  std::vector<uint8_t> file = binio::read_file(path);
  if (file.size() < 10 || std::memcmp(file.data(), "CMSN", 4) != 0)
    throw FormatError(path + ": bad snapshot magic");
  const uint16_t version = static_cast<uint16_t>(file[4] | (file[5] << 8));
  if (version != 1) throw FormatError(path + ": unsupported snapshot version " + std::to_string(version));
  const size_t body_len = file.size() - 10;
  const uint8_t* body = file.data() + 6;
  const uint8_t* trailer = file.data() + file.size() - 4;
  const uint32_t stored = static_cast<uint32_t>(trailer[0]) | (static_cast<uint32_t>(trailer[1]) << 8) |
                          (static_cast<uint32_t>(trailer[2]) << 16) | (static_cast<uint32_t>(trailer[3]) << 24);
  if (crc32(body, body_len) != stored) throw FormatError(path + ": checksum mismatch");

  size_t off = 0;
  auto need = [&](size_t n, const char* what) {
    if (off + n > body_len) throw FormatError(path + ": truncated snapshot while reading " + what);
  };
  auto u32 = [&](const char* what) {
    need(4, what);
    const uint32_t v = static_cast<uint32_t>(body[off]) | (static_cast<uint32_t>(body[off + 1]) << 8) |
                       (static_cast<uint32_t>(body[off + 2]) << 16) | (static_cast<uint32_t>(body[off + 3]) << 24);
    off += 4;
    return v;
  };

  ModelSnapshot snap;
  const uint32_t mlen = u32("manifest length");
  need(mlen, "manifest");
  nlohmann::json manifest = nlohmann::json::parse(body + off, body + off + mlen, nullptr, false);
  if (manifest.is_discarded()) throw FormatError(path + ": manifest is not valid JSON");
  off += mlen;
  manifest.at("config").get_to(snap.config);
  snap.model_id = manifest.value("model_id", "");
  snap.trained_on = manifest.value("trained_on", "");
  snap.best_val_accuracy = manifest.value("best_val_accuracy", 0.0);
  snap.epoch_of_best = manifest.value("epoch_of_best", 0);
  for (const auto& e : manifest.value("history", nlohmann::json::array()))
    snap.history.push_back({e.value("epoch", 0), e.value("train_loss", 0.0), e.value("val_accuracy", 0.0)});

  const uint32_t count = u32("tensor count");
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = u32("tensor name length");
    need(name_len, "tensor name");
    std::string name(reinterpret_cast<const char*>(body + off), name_len);
    off += name_len;
    const uint32_t rank = u32("tensor rank");
    std::vector<int64_t> shape;
    int64_t total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<int64_t>(u32("tensor dim")));
      total *= shape.back();
    }
    need(static_cast<size_t>(total) * 4, "tensor payload");
    std::vector<float> values(static_cast<size_t>(total));
    std::memcpy(values.data(), body + off, static_cast<size_t>(total) * 4);
    off += static_cast<size_t>(total) * 4;
    snap.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return snap;
}

}  // namespace chroma
