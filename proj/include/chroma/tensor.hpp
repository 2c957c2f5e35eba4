#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace chroma {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string shape_string(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace detail

// Dense N-d array of f32 in row-major order (last axis fastest). Operations
// return new tensors; an existing tensor is never mutated by the kernels
// below.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(checked_size(shape_), 0.0f);
  }

  Tensor(std::vector<int64_t> shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (checked_size(shape_) != static_cast<int64_t>(data_.size()))
      throw DimensionError("Tensor: " + std::to_string(data_.size()) + " values do not fill shape " +
                           detail::shape_string(shape_));
  }

  static Tensor full(std::vector<int64_t> shape, float value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
  }

  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }
  const std::vector<int64_t>& shape() const { return shape_; }
  std::string shape_str() const { return detail::shape_string(shape_); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Checked multi-index access; convenience for tests and small code paths.
  float& at(std::initializer_list<int64_t> idx) { return data_[static_cast<size_t>(offset(idx))]; }
  float at(std::initializer_list<int64_t> idx) const { return data_[static_cast<size_t>(offset(idx))]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (float v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Size-preserving shape change.
  Tensor reshaped(std::vector<int64_t> shape) const& {
    Tensor t = *this;
    return std::move(t).reshaped(std::move(shape));
  }
  Tensor reshaped(std::vector<int64_t> shape) && {
    if (checked_size(shape) != size())
      throw DimensionError("reshape: " + detail::shape_string(shape) + " does not hold " + shape_str());
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data_);
    return t;
  }

 private:
  static int64_t checked_size(const std::vector<int64_t>& shape) {
    if (shape.empty()) throw DimensionError("Tensor: rank must be at least 1");
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d <= 0) throw DimensionError("Tensor: non-positive dimension in " + detail::shape_string(shape));
      n *= d;
    }
    return n;
  }

  int64_t offset(std::initializer_list<int64_t> idx) const {
    if (static_cast<int64_t>(idx.size()) != rank())
      throw DimensionError("Tensor::at: index rank mismatch for " + shape_str());
    int64_t off = 0;
    size_t axis = 0;
    for (int64_t i : idx) {
      if (i < 0 || i >= shape_[axis]) throw DimensionError("Tensor::at: index out of range for " + shape_str());
      off = off * shape_[axis] + i;
      ++axis;
    }
    return off;
  }

  std::vector<int64_t> shape_;
  std::vector<float> data_;
};

// Batch image geometry; all four extents strictly positive.
struct Shape4 {
  int64_t n = 0, c = 0, h = 0, w = 0;
  int64_t pixels() const { return h * w; }
  int64_t per_sample() const { return c * h * w; }
};

inline Shape4 as_shape4(const Tensor& t, const char* what) {
  if (t.rank() != 4) throw DimensionError(std::string(what) + ": expected rank-4 tensor, got " + t.shape_str());
  return Shape4{t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

namespace detail {

using EMatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<EMatRM>;
using CMapRM = Eigen::Map<const EMatRM>;

// Unrolls 3x3 neighborhoods (zero border) of one c*h*w image into a
// row-major [c*9, h*w] patch matrix.
inline void im2col_3x3(const float* x, int64_t c, int64_t h, int64_t w, float* col) {
  for (int64_t ci = 0; ci < c; ++ci) {
    const float* plane = x + ci * h * w;
    for (int64_t u = 0; u < 3; ++u) {
      for (int64_t v = 0; v < 3; ++v) {
        float* row = col + ((ci * 3 + u) * 3 + v) * h * w;
        for (int64_t i = 0; i < h; ++i) {
          const int64_t si = i + u - 1;
          float* dst = row + i * w;
          if (si < 0 || si >= h) {
            std::memset(dst, 0, sizeof(float) * static_cast<size_t>(w));
            continue;
          }
          const float* src = plane + si * w;
          const int64_t shift = v - 1;  // source column = j + shift
          int64_t j0 = std::max<int64_t>(0, -shift);
          int64_t j1 = std::min<int64_t>(w, w - shift);
          if (j0 > 0) std::memset(dst, 0, sizeof(float) * static_cast<size_t>(j0));
          if (j1 < w) std::memset(dst + j1, 0, sizeof(float) * static_cast<size_t>(w - j1));
          if (j1 > j0) std::memcpy(dst + j0, src + j0 + shift, sizeof(float) * static_cast<size_t>(j1 - j0));
        }
      }
    }
  }
}

// Transpose of im2col: scatter-adds a [c*9, h*w] patch matrix back onto the
// c*h*w image grid.
inline void col2im_3x3_add(const float* col, int64_t c, int64_t h, int64_t w, float* x) {
  for (int64_t ci = 0; ci < c; ++ci) {
    float* plane = x + ci * h * w;
    for (int64_t u = 0; u < 3; ++u) {
      for (int64_t v = 0; v < 3; ++v) {
        const float* row = col + ((ci * 3 + u) * 3 + v) * h * w;
        const int64_t shift = v - 1;
        for (int64_t i = 0; i < h; ++i) {
          const int64_t si = i + u - 1;
          if (si < 0 || si >= h) continue;
          const float* src = row + i * w;
          float* dst = plane + si * w;
          const int64_t j0 = std::max<int64_t>(0, -shift);
          const int64_t j1 = std::min<int64_t>(w, w - shift);
          for (int64_t j = j0; j < j1; ++j) dst[j + shift] += src[j];
        }
      }
    }
  }
}

}  // namespace detail

// out[i][j] = sum_k a[i][k] * b[k][j]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul: expected rank-2 tensors, got " + a.shape_str() + " and " + b.shape_str());
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner dimensions disagree: " + a.shape_str() + " x " + b.shape_str());
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  detail::MapRM(out.data(), m, n).noalias() =
      detail::CMapRM(a.data(), m, k) * detail::CMapRM(b.data(), k, n);
  return out;
}

// 3x3 cross-correlation (no kernel flip), "same" zero padding, stride 1,
// plus a per-output-channel bias. input [n,cin,h,w], kernels [cout,cin,3,3],
// bias [cout] -> [n,cout,h,w].
inline Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const Shape4 s = as_shape4(input, "conv2d input");
  const Shape4 k = as_shape4(kernels, "conv2d kernels");
  if (k.h != 3 || k.w != 3)
    throw DimensionError("conv2d: kernel spatial size must be 3x3, got " + kernels.shape_str());
  if (k.c != s.c)
    throw DimensionError("conv2d: input channels " + input.shape_str() + " do not match kernels " +
                         kernels.shape_str());
  if (bias.rank() != 1 || bias.dim(0) != k.n)
    throw DimensionError("conv2d: bias " + bias.shape_str() + " does not match kernels " + kernels.shape_str());
  const int64_t cout = k.n, K = s.c * 9, P = s.pixels();
  Tensor out({s.n, cout, s.h, s.w});
  std::vector<float> col(static_cast<size_t>(K * P));
  detail::CMapRM W(kernels.data(), cout, K);
  Eigen::Map<const Eigen::VectorXf> B(bias.data(), cout);
  for (int64_t n = 0; n < s.n; ++n) {
    detail::im2col_3x3(input.data() + n * s.per_sample(), s.c, s.h, s.w, col.data());
    detail::MapRM Y(out.data() + n * cout * P, cout, P);
    Y.noalias() = W * detail::CMapRM(col.data(), K, P);
    Y.colwise() += B;
  }
  return out;
}

struct PoolResult {
  Tensor values;                 // [n,c,h/2,w/2]
  std::vector<int64_t> argmax;   // flat index into the input, per output cell
};

// 2x2 max pooling with stride 2 and no padding; argmax indices are kept for
// the backward pass. Ties resolve to the first element in window scan order.
inline PoolResult maxpool2d(const Tensor& input) {
  const Shape4 s = as_shape4(input, "maxpool2d input");
  if (s.h % 2 != 0 || s.w % 2 != 0)
    throw DimensionError("maxpool2d: spatial dims must be even, got " + input.shape_str());
  const int64_t oh = s.h / 2, ow = s.w / 2;
  PoolResult res{Tensor({s.n, s.c, oh, ow}), {}};
  res.argmax.resize(static_cast<size_t>(res.values.size()));
  const float* in = input.data();
  float* out = res.values.data();
  int64_t o = 0;
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      const int64_t base = (n * s.c + c) * s.h * s.w;
      for (int64_t i = 0; i < oh; ++i) {
        for (int64_t j = 0; j < ow; ++j) {
          int64_t best = base + (2 * i) * s.w + 2 * j;
          float bv = in[best];
          const int64_t cand[3] = {best + 1, best + s.w, best + s.w + 1};
          for (int64_t idx : cand) {
            if (in[idx] > bv) {
              bv = in[idx];
              best = idx;
            }
          }
          out[o] = bv;
          res.argmax[static_cast<size_t>(o)] = best;
          ++o;
        }
      }
    }
  }
  return res;
}

struct MeanVar {
  Tensor mean;  // input shape with reduced axes kept as size 1
  Tensor var;   // biased (population) variance, same shape as mean
};

// Mean and biased variance over the given axes. eps is the caller's
// normalization epsilon; it is validated here but the returned variance is
// the raw population value.
inline MeanVar reduce_mean_var(const Tensor& input, const std::vector<int64_t>& axes, float eps) {
  if (axes.empty()) throw DimensionError("reduce_mean_var: empty reduction set");
  if (!(eps > 0.0f)) throw std::invalid_argument("reduce_mean_var: eps must be positive");
  const int64_t rank = input.rank();
  std::vector<bool> reduced(static_cast<size_t>(rank), false);
  for (int64_t a : axes) {
    if (a < 0 || a >= rank)
      throw DimensionError("reduce_mean_var: axis " + std::to_string(a) + " invalid for " + input.shape_str());
    reduced[static_cast<size_t>(a)] = true;
  }
  std::vector<int64_t> out_shape = input.shape();
  int64_t m = 1;
  for (int64_t a = 0; a < rank; ++a) {
    if (reduced[static_cast<size_t>(a)]) {
      m *= out_shape[static_cast<size_t>(a)];
      out_shape[static_cast<size_t>(a)] = 1;
    }
  }
  Tensor mean(out_shape), var(out_shape);
  std::vector<double> sum(static_cast<size_t>(mean.size()), 0.0);
  std::vector<double> sumsq(static_cast<size_t>(mean.size()), 0.0);
  // row-major strides of the output grid
  std::vector<int64_t> ostride(static_cast<size_t>(rank), 1);
  for (int64_t a = rank - 2; a >= 0; --a)
    ostride[static_cast<size_t>(a)] = ostride[static_cast<size_t>(a + 1)] * out_shape[static_cast<size_t>(a + 1)];
  std::vector<int64_t> coord(static_cast<size_t>(rank), 0);
  const float* x = input.data();
  for (int64_t i = 0; i < input.size(); ++i) {
    int64_t o = 0;
    for (int64_t a = 0; a < rank; ++a)
      if (!reduced[static_cast<size_t>(a)]) o += coord[static_cast<size_t>(a)] * ostride[static_cast<size_t>(a)];
    const double v = x[i];
    sum[static_cast<size_t>(o)] += v;
    sumsq[static_cast<size_t>(o)] += v * v;
    for (int64_t a = rank - 1; a >= 0; --a) {
      if (++coord[static_cast<size_t>(a)] < input.dim(a)) break;
      coord[static_cast<size_t>(a)] = 0;
    }
  }
  for (int64_t o = 0; o < mean.size(); ++o) {
    const double mu = sum[static_cast<size_t>(o)] / static_cast<double>(m);
    mean[o] = static_cast<float>(mu);
    var[o] = static_cast<float>(sumsq[static_cast<size_t>(o)] / static_cast<double>(m) - mu * mu);
    if (var[o] < 0.0f) var[o] = 0.0f;  // cancellation guard
  }
  return {std::move(mean), std::move(var)};
}

// Channel concatenation: a's channels first, then b's. Batch and spatial
// extents must agree.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape4 sa = as_shape4(a, "concat_channels a");
  const Shape4 sb = as_shape4(b, "concat_channels b");
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw DimensionError("concat_channels: batch/spatial mismatch: " + a.shape_str() + " vs " + b.shape_str());
  Tensor out({sa.n, sa.c + sb.c, sa.h, sa.w});
  const int64_t pa = sa.per_sample(), pb = sb.per_sample();
  for (int64_t n = 0; n < sa.n; ++n) {
    std::memcpy(out.data() + n * (pa + pb), a.data() + n * pa, sizeof(float) * static_cast<size_t>(pa));
    std::memcpy(out.data() + n * (pa + pb) + pa, b.data() + n * pb, sizeof(float) * static_cast<size_t>(pb));
  }
  return out;
}

}  // namespace chroma
