#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "chroma/rng.hpp"
#include "chroma/tensor.hpp"

namespace chroma {

enum class Mode { train, eval };

// Named view onto a layer's tensor plus the matching gradient slot (null for
// buffers such as running statistics).
struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  // Gradient w.r.t. the last forward's input; parameter gradients are written
  // into the layer's grad slots (overwritten, not accumulated).
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {}
  virtual void collect_buffers(const std::string& prefix, std::vector<ParamRef>& out) {}
  virtual const char* kind() const = 0;
};

// ---------------------------------------------------------------------------
// Dense: y = x.W + b, x [n,din], W [din,dout], b [dout]

class Dense : public Layer {
 public:
  Dense(int64_t din, int64_t dout)
      : weight_({din, dout}), bias_({dout}), grad_weight_({din, dout}), grad_bias_({dout}) {}

  Tensor forward(const Tensor& x, Mode) override {
    if (x.rank() != 2 || x.dim(1) != weight_.dim(0))
      throw DimensionError("dense: input " + x.shape_str() + " does not match weight " + weight_.shape_str());
    cached_x_ = x;
    const int64_t n = x.dim(0), din = weight_.dim(0), dout = weight_.dim(1);
    Tensor y({n, dout});
    detail::MapRM Y(y.data(), n, dout);
    Y.noalias() = detail::CMapRM(x.data(), n, din) * detail::CMapRM(weight_.data(), din, dout);
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias_.data(), dout);
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const int64_t n = cached_x_.dim(0), din = weight_.dim(0), dout = weight_.dim(1);
    detail::CMapRM G(g.data(), n, dout);
    detail::CMapRM X(cached_x_.data(), n, din);
    detail::MapRM(grad_weight_.data(), din, dout).noalias() = X.transpose() * G;
    Eigen::Map<Eigen::RowVectorXf>(grad_bias_.data(), dout) = G.colwise().sum();
    Tensor gx({n, din});
    detail::MapRM(gx.data(), n, din).noalias() = G * detail::CMapRM(weight_.data(), din, dout).transpose();
    return gx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", &weight_, &grad_weight_});
    out.push_back({prefix + ".bias", &bias_, &grad_bias_});
  }

  const char* kind() const override { return "dense"; }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_, bias_, grad_weight_, grad_bias_;
  Tensor cached_x_;
};

// ---------------------------------------------------------------------------
// ReLU: gradient passes where x > 0 and is cut where x <= 0.

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode) override {
    positive_.assign(static_cast<size_t>(x.size()), 0);
    Tensor y = x;
    for (int64_t i = 0; i < y.size(); ++i) {
      if (y[i] > 0.0f)
        positive_[static_cast<size_t>(i)] = 1;
      else
        y[i] = 0.0f;
    }
    shape_ = x.shape();
    return y;
  }

  Tensor backward(const Tensor& g) override {
    Tensor gx = g;
    for (int64_t i = 0; i < gx.size(); ++i)
      if (!positive_[static_cast<size_t>(i)]) gx[i] = 0.0f;
    return gx;
  }

  const char* kind() const override { return "relu"; }

 private:
  std::vector<uint8_t> positive_;
  std::vector<int64_t> shape_;
};

// ---------------------------------------------------------------------------
// Conv2d: 3x3 same-padding cross-correlation. The im2col patch matrix is
// cached per forward so the two backward GEMMs reuse it.

class Conv2d : public Layer {
 public:
  Conv2d(int64_t cin, int64_t cout)
      : weight_({cout, cin, 3, 3}), bias_({cout}), grad_weight_({cout, cin, 3, 3}), grad_bias_({cout}) {}

  Tensor forward(const Tensor& x, Mode) override {
    const Shape4 s = as_shape4(x, "conv2d input");
    if (s.c != weight_.dim(1))
      throw DimensionError("conv2d: input channels " + x.shape_str() + " do not match kernels " +
                           weight_.shape_str());
    in_shape_ = s;
    const int64_t cout = weight_.dim(0), K = s.c * 9, P = s.pixels();
    col_.resize(static_cast<size_t>(s.n * K * P));
    Tensor y({s.n, cout, s.h, s.w});
    detail::CMapRM W(weight_.data(), cout, K);
    Eigen::Map<const Eigen::VectorXf> B(bias_.data(), cout);
    for (int64_t n = 0; n < s.n; ++n) {
      float* col = col_.data() + n * K * P;
      detail::im2col_3x3(x.data() + n * s.per_sample(), s.c, s.h, s.w, col);
      detail::MapRM Y(y.data() + n * cout * P, cout, P);
      Y.noalias() = W * detail::CMapRM(col, K, P);
      Y.colwise() += B;
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const Shape4 s = in_shape_;
    const int64_t cout = weight_.dim(0), K = s.c * 9, P = s.pixels();
    Tensor gx({s.n, s.c, s.h, s.w});
    detail::MapRM GW(grad_weight_.data(), cout, K);
    GW.setZero();
    Eigen::Map<Eigen::VectorXf> GB(grad_bias_.data(), cout);
    GB.setZero();
    detail::CMapRM W(weight_.data(), cout, K);
    std::vector<float> colgrad(static_cast<size_t>(K * P));
    for (int64_t n = 0; n < s.n; ++n) {
      detail::CMapRM G(g.data() + n * cout * P, cout, P);
      detail::CMapRM col(col_.data() + n * K * P, K, P);
      GW.noalias() += G * col.transpose();
      GB.noalias() += G.rowwise().sum();
      detail::MapRM CG(colgrad.data(), K, P);
      CG.noalias() = W.transpose() * G;
      detail::col2im_3x3_add(colgrad.data(), s.c, s.h, s.w, gx.data() + n * s.per_sample());
    }
    return gx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".weight", &weight_, &grad_weight_});
    out.push_back({prefix + ".bias", &bias_, &grad_bias_});
  }

  const char* kind() const override { return "conv"; }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_, bias_, grad_weight_, grad_bias_;
  Shape4 in_shape_{};
  std::vector<float> col_;
};

// ---------------------------------------------------------------------------
// 2x2/stride-2 max pooling.

class MaxPool2x2 : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode) override {
    in_shape_ = x.shape();
    PoolResult r = maxpool2d(x);
    argmax_ = std::move(r.argmax);
    return std::move(r.values);
  }

  Tensor backward(const Tensor& g) override {
    Tensor gx(in_shape_);
    for (int64_t o = 0; o < g.size(); ++o) gx[argmax_[static_cast<size_t>(o)]] += g[o];
    return gx;
  }

  const char* kind() const override { return "maxpool"; }

 private:
  std::vector<int64_t> in_shape_;
  std::vector<int64_t> argmax_;
};

// ---------------------------------------------------------------------------
// Flatten [n,c,h,w] -> [n, c*h*w]

class Flatten : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode) override {
    in_shape_ = x.shape();
    const Shape4 s = as_shape4(x, "flatten input");
    return Tensor(x).reshaped({s.n, s.per_sample()});
  }

  Tensor backward(const Tensor& g) override { return Tensor(g).reshaped(in_shape_); }

  const char* kind() const override { return "flatten"; }

 private:
  std::vector<int64_t> in_shape_;
};

// ---------------------------------------------------------------------------
// Normalization. All three kinds share the grouped-moments math and differ
// only in how elements are grouped:
//   batch    - one group per channel over (n,h,w), with running statistics
//   layer    - one group per sample over (c,h,w)
//   instance - one group per (sample, channel) over (h,w)
// The affine transform is per channel (gamma init 1, beta init 0) for every
// kind.

enum class NormKind { batch, layer, instance, none };

inline const char* norm_kind_name(NormKind k) {
  switch (k) {
    case NormKind::batch: return "batch";
    case NormKind::layer: return "layer";
    case NormKind::instance: return "instance";
    default: return "none";
  }
}

class Normalization : public Layer {
 public:
  Normalization(NormKind kind, int64_t channels, float eps = 1e-5f, float momentum = 0.1f)
      : kind_(kind),
        channels_(channels),
        eps_(eps),
        momentum_(momentum),
        gamma_(Tensor::full({channels}, 1.0f)),
        beta_({channels}),
        grad_gamma_({channels}),
        grad_beta_({channels}) {
    if (kind_ == NormKind::batch) {
      running_mean_ = Tensor({channels});
      running_var_ = Tensor::full({channels}, 1.0f);
    }
  }

  Tensor forward(const Tensor& x, Mode mode) override {
    const Shape4 s = as_shape4(x, "normalization input");
    if (s.c != channels_)
      throw DimensionError("normalization: expected " + std::to_string(channels_) + " channels, got " +
                           x.shape_str());
    in_shape_ = s;
    mode_ = mode;
    const int64_t groups = group_count(s);
    const int64_t m = group_size(s);
    if (mode == Mode::train || kind_ != NormKind::batch) {
      if (m < 2)
        throw DimensionError("normalization: group size must be at least 2, got input " + x.shape_str());
      mean_.assign(static_cast<size_t>(groups), 0.0);
      inv_std_.assign(static_cast<size_t>(groups), 0.0);
      std::vector<double> sum(static_cast<size_t>(groups), 0.0), sumsq(static_cast<size_t>(groups), 0.0);
      for (int64_t n = 0; n < s.n; ++n) {
        for (int64_t c = 0; c < s.c; ++c) {
          const int64_t g = group_of(n, c, s);
          const float* p = x.data() + (n * s.c + c) * s.pixels();
          double a = 0.0, b = 0.0;
          for (int64_t i = 0; i < s.pixels(); ++i) {
            a += p[i];
            b += static_cast<double>(p[i]) * p[i];
          }
          sum[static_cast<size_t>(g)] += a;
          sumsq[static_cast<size_t>(g)] += b;
        }
      }
      for (int64_t g = 0; g < groups; ++g) {
        const double mu = sum[static_cast<size_t>(g)] / static_cast<double>(m);
        double var = sumsq[static_cast<size_t>(g)] / static_cast<double>(m) - mu * mu;
        if (var < 0.0) var = 0.0;
        mean_[static_cast<size_t>(g)] = mu;
        inv_std_[static_cast<size_t>(g)] = 1.0 / std::sqrt(var + static_cast<double>(eps_));
        if (kind_ == NormKind::batch && mode == Mode::train) {
          running_mean_[g] = (1.0f - momentum_) * running_mean_[g] + momentum_ * static_cast<float>(mu);
          running_var_[g] = (1.0f - momentum_) * running_var_[g] + momentum_ * static_cast<float>(var);
        }
      }
    } else {
      // batch kind, eval mode: normalize with running statistics
      mean_.assign(static_cast<size_t>(groups), 0.0);
      inv_std_.assign(static_cast<size_t>(groups), 0.0);
      for (int64_t c = 0; c < channels_; ++c) {
        mean_[static_cast<size_t>(c)] = running_mean_[c];
        inv_std_[static_cast<size_t>(c)] = 1.0 / std::sqrt(static_cast<double>(running_var_[c]) + eps_);
      }
    }
    xhat_ = Tensor(x.shape());
    Tensor y(x.shape());
    for (int64_t n = 0; n < s.n; ++n) {
      for (int64_t c = 0; c < s.c; ++c) {
        const int64_t g = group_of(n, c, s);
        const float mu = static_cast<float>(mean_[static_cast<size_t>(g)]);
        const float is = static_cast<float>(inv_std_[static_cast<size_t>(g)]);
        const float ga = gamma_[c], be = beta_[c];
        const int64_t off = (n * s.c + c) * s.pixels();
        const float* px = x.data() + off;
        float* ph = xhat_.data() + off;
        float* py = y.data() + off;
        for (int64_t i = 0; i < s.pixels(); ++i) {
          const float xh = (px[i] - mu) * is;
          ph[i] = xh;
          py[i] = ga * xh + be;
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    const Shape4 s = in_shape_;
    const int64_t groups = group_count(s);
    const int64_t m = group_size(s);
    // per-channel affine gradients
    std::vector<double> dga(static_cast<size_t>(channels_), 0.0), dbe(static_cast<size_t>(channels_), 0.0);
    // per-group sums of dxhat and dxhat*xhat
    std::vector<double> s1(static_cast<size_t>(groups), 0.0), s2(static_cast<size_t>(groups), 0.0);
    for (int64_t n = 0; n < s.n; ++n) {
      for (int64_t c = 0; c < s.c; ++c) {
        const int64_t grp = group_of(n, c, s);
        const int64_t off = (n * s.c + c) * s.pixels();
        const float* pg = g.data() + off;
        const float* ph = xhat_.data() + off;
        const double ga = gamma_[c];
        double a = 0.0, b = 0.0, dg = 0.0, db = 0.0;
        for (int64_t i = 0; i < s.pixels(); ++i) {
          const double dxh = pg[i] * ga;
          a += dxh;
          b += dxh * ph[i];
          dg += static_cast<double>(pg[i]) * ph[i];
          db += pg[i];
        }
        s1[static_cast<size_t>(grp)] += a;
        s2[static_cast<size_t>(grp)] += b;
        dga[static_cast<size_t>(c)] += dg;
        dbe[static_cast<size_t>(c)] += db;
      }
    }
    for (int64_t c = 0; c < channels_; ++c) {
      grad_gamma_[c] = static_cast<float>(dga[static_cast<size_t>(c)]);
      grad_beta_[c] = static_cast<float>(dbe[static_cast<size_t>(c)]);
    }
    Tensor gx({s.n, s.c, s.h, s.w});
    const bool frozen_stats = (kind_ == NormKind::batch && mode_ == Mode::eval);
    for (int64_t n = 0; n < s.n; ++n) {
      for (int64_t c = 0; c < s.c; ++c) {
        const int64_t grp = group_of(n, c, s);
        const float is = static_cast<float>(inv_std_[static_cast<size_t>(grp)]);
        const float ga = gamma_[c];
        const float mean_dxh = frozen_stats ? 0.0f : static_cast<float>(s1[static_cast<size_t>(grp)] / m);
        const float mean_dxh_xh = frozen_stats ? 0.0f : static_cast<float>(s2[static_cast<size_t>(grp)] / m);
        const int64_t off = (n * s.c + c) * s.pixels();
        const float* pg = g.data() + off;
        const float* ph = xhat_.data() + off;
        float* px = gx.data() + off;
        for (int64_t i = 0; i < s.pixels(); ++i)
          px[i] = is * (pg[i] * ga - mean_dxh - ph[i] * mean_dxh_xh);
      }
    }
    return gx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override {
    out.push_back({prefix + ".gamma", &gamma_, &grad_gamma_});
    out.push_back({prefix + ".beta", &beta_, &grad_beta_});
  }

  void collect_buffers(const std::string& prefix, std::vector<ParamRef>& out) override {
    if (kind_ == NormKind::batch) {
      out.push_back({prefix + ".running_mean", &running_mean_, nullptr});
      out.push_back({prefix + ".running_var", &running_var_, nullptr});
    }
  }

  const char* kind() const override { return "normalization"; }
  NormKind norm_kind() const { return kind_; }
  Tensor& gamma() { return gamma_; }
  Tensor& beta() { return beta_; }
  const Tensor& running_mean() const { return running_mean_; }
  const Tensor& running_var() const { return running_var_; }

 private:
  int64_t group_count(const Shape4& s) const {
    switch (kind_) {
      case NormKind::batch: return s.c;
      case NormKind::layer: return s.n;
      default: return s.n * s.c;
    }
  }
  int64_t group_size(const Shape4& s) const {
    switch (kind_) {
      case NormKind::batch: return s.n * s.pixels();
      case NormKind::layer: return s.per_sample();
      default: return s.pixels();
    }
  }
  int64_t group_of(int64_t n, int64_t c, const Shape4& s) const {
    switch (kind_) {
      case NormKind::batch: return c;
      case NormKind::layer: return n;
      default: return n * s.c + c;
    }
  }

  NormKind kind_;
  int64_t channels_;
  float eps_, momentum_;
  Tensor gamma_, beta_, grad_gamma_, grad_beta_;
  Tensor running_mean_, running_var_;
  // forward cache
  Tensor xhat_;
  std::vector<double> mean_, inv_std_;
  Shape4 in_shape_{};
  Mode mode_ = Mode::train;
};

// ---------------------------------------------------------------------------
// Grayscale concat: appends a weighted channel average as a fourth channel.
// Weights must be nonnegative and sum to 1 (within 1e-6).

inline void validate_gray_weights(const std::array<float, 3>& w) {
  float sum = 0.0f;
  for (float v : w) {
    if (v < 0.0f) throw std::invalid_argument("gray_weights must be nonnegative");
    sum += v;
  }
  if (std::fabs(sum - 1.0f) > 1e-6f) throw std::invalid_argument("gray_weights must sum to 1");
}

inline Tensor grayscale_concat(const Tensor& x, const std::array<float, 3>& weights) {
  validate_gray_weights(weights);
  const Shape4 s = as_shape4(x, "grayscale_concat input");
  if (s.c != 3) throw DimensionError("grayscale_concat: expected 3 channels, got " + x.shape_str());
  Tensor out({s.n, 4, s.h, s.w});
  const int64_t p = s.pixels();
  for (int64_t n = 0; n < s.n; ++n) {
    const float* src = x.data() + n * 3 * p;
    float* dst = out.data() + n * 4 * p;
    std::memcpy(dst, src, sizeof(float) * static_cast<size_t>(3 * p));
    float* gray = dst + 3 * p;
    for (int64_t i = 0; i < p; ++i)
      gray[i] = weights[0] * src[i] + weights[1] * src[p + i] + weights[2] * src[2 * p + i];
  }
  return out;
}

class GrayscaleConcat : public Layer {
 public:
  explicit GrayscaleConcat(const std::array<float, 3>& weights) : weights_(weights) {
    validate_gray_weights(weights_);
  }

  Tensor forward(const Tensor& x, Mode) override { return grayscale_concat(x, weights_); }

  Tensor backward(const Tensor& g) override {
    const Shape4 s = as_shape4(g, "grayscale_concat grad");
    Tensor gx({s.n, 3, s.h, s.w});
    const int64_t p = s.pixels();
    for (int64_t n = 0; n < s.n; ++n) {
      const float* src = g.data() + n * 4 * p;
      const float* gray = src + 3 * p;
      float* dst = gx.data() + n * 3 * p;
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t i = 0; i < p; ++i) dst[c * p + i] = src[c * p + i] + weights_[c] * gray[i];
    }
    return gx;
  }

  const char* kind() const override { return "gray_concat"; }

 private:
  std::array<float, 3> weights_;
};

// ---------------------------------------------------------------------------
// Channel dropout on a 4-channel (RGB + gray) tensor. In training, one
// uniform draw per forward call decides whether the three color channels are
// zeroed while the gray channel passes; evaluation is the identity. An
// optional per-sample variant draws once per sample instead.

inline Tensor custom_channel_dropout(const Tensor& x, float prob, Mode mode, Rng& rng) {
  if (prob < 0.0f || prob > 1.0f) throw std::invalid_argument("channel dropout prob must be in [0,1]");
  const Shape4 s = as_shape4(x, "channel_dropout input");
  if (s.c != 4) throw DimensionError("channel_dropout: expected 4 channels, got " + x.shape_str());
  if (mode == Mode::eval) return x;
  const float rand_prob = rng.uniform_float();
  if (!(rand_prob < prob)) return x;
  Tensor out = x;
  const int64_t p = s.pixels();
  for (int64_t n = 0; n < s.n; ++n)
    std::memset(out.data() + n * 4 * p, 0, sizeof(float) * static_cast<size_t>(3 * p));
  return out;
}

class ChannelDropout : public Layer {
 public:
  ChannelDropout(float prob, uint64_t rng_seed, bool per_sample = false)
      : prob_(prob), per_sample_(per_sample), rng_(Rng::derive(rng_seed, 0xD0u)) {
    if (prob_ < 0.0f || prob_ > 1.0f) throw std::invalid_argument("channel dropout prob must be in [0,1]");
  }

  Tensor forward(const Tensor& x, Mode mode) override {
    const Shape4 s = as_shape4(x, "channel_dropout input");
    if (s.c != 4) throw DimensionError("channel_dropout: expected 4 channels, got " + x.shape_str());
    in_shape_ = s;
    masked_.assign(static_cast<size_t>(s.n), 0);
    if (mode == Mode::eval) return x;
    if (per_sample_) {
      for (int64_t n = 0; n < s.n; ++n) masked_[static_cast<size_t>(n)] = rng_.uniform_float() < prob_ ? 1 : 0;
    } else {
      const uint8_t m = rng_.uniform_float() < prob_ ? 1 : 0;
      for (auto& v : masked_) v = m;
    }
    Tensor out = x;
    const int64_t p = s.pixels();
    for (int64_t n = 0; n < s.n; ++n)
      if (masked_[static_cast<size_t>(n)])
        std::memset(out.data() + n * 4 * p, 0, sizeof(float) * static_cast<size_t>(3 * p));
    return out;
  }

  Tensor backward(const Tensor& g) override {
    Tensor gx = g;
    const int64_t p = in_shape_.pixels();
    for (int64_t n = 0; n < in_shape_.n; ++n)
      if (masked_[static_cast<size_t>(n)])
        std::memset(gx.data() + n * 4 * p, 0, sizeof(float) * static_cast<size_t>(3 * p));
    return gx;
  }

  const char* kind() const override { return "channel_dropout"; }
  const std::vector<uint8_t>& last_mask() const { return masked_; }

 private:
  float prob_;
  bool per_sample_;
  Rng rng_;
  Shape4 in_shape_{};
  std::vector<uint8_t> masked_;
};

// ---------------------------------------------------------------------------
// Softmax cross-entropy head.

inline Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("softmax: expected rank-2 logits, got " + logits.shape_str());
  const int64_t n = logits.dim(0), k = logits.dim(1);
  Tensor probs({n, k});
  for (int64_t r = 0; r < n; ++r) {
    const float* row = logits.data() + r * k;
    float* out = probs.data() + r * k;
    float mx = row[0];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j) {
      const double e = std::exp(static_cast<double>(row[j]) - mx);
      out[j] = static_cast<float>(e);
      sum += e;
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (int64_t j = 0; j < k; ++j) out[j] *= inv;
  }
  return probs;
}

struct SoftmaxCEResult {
  double loss = 0.0;    // mean negative log-likelihood
  Tensor probs;         // [n,k], rows sum to 1
  Tensor grad_logits;   // (probs - onehot) / n
};

inline SoftmaxCEResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  const int64_t n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         logits.shape_str());
  SoftmaxCEResult res;
  res.probs = softmax_rows(logits);
  res.grad_logits = res.probs;
  double loss = 0.0;
  const float inv_n = 1.0f / static_cast<float>(n);
  for (int64_t r = 0; r < n; ++r) {
    const int y = labels[static_cast<size_t>(r)];
    if (y < 0 || y >= k)
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) + " outside [0," +
                              std::to_string(k) + ")");
    const double p = std::max(static_cast<double>(res.probs[r * k + y]), 1e-12);
    loss -= std::log(p);
    res.grad_logits[r * k + y] -= 1.0f;
  }
  for (int64_t i = 0; i < res.grad_logits.size(); ++i) res.grad_logits[i] *= inv_n;
  res.loss = loss / static_cast<double>(n);
  return res;
}

// Algorithm config for the gray4 input stage.
struct CustomDropoutConfig {
  float prob = 0.5f;
  std::array<float, 3> gray_weights = {1.0f / 3.0f, 1.0f / 3.0f, 1.0f / 3.0f};
  bool per_sample = false;
};

}  // namespace chroma
