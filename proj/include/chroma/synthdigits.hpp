#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chroma/datagen.hpp"
#include "chroma/rng.hpp"

// Deterministic stand-in for a handwritten-digit corpus, written in the same
// IDX layout as MNIST (28x28 u8, big-endian headers, standard filenames).
// Digits are rasterized from stroke templates under random affine jitter,
// stroke-width and intensity variation, so classes are learnable but not
// trivially separable. A fixed seed reproduces the corpus byte for byte.
namespace chroma::synth {

struct SynthSpec {
  int train_per_class = 6000;
  int test_per_class = 1000;
  uint64_t seed = 20240607;
};

namespace detail {

struct Pt {
  float x, y;
};

using Stroke = std::vector<Pt>;

inline Stroke line(Pt a, Pt b, int steps = 24) {
  Stroke s;
  s.reserve(static_cast<size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const float t = static_cast<float>(i) / static_cast<float>(steps);
    s.push_back({a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t});
  }
  return s;
}

// Elliptic arc; y grows downward, so theta 0 points right and pi/2 down.
inline Stroke arc(float cx, float cy, float rx, float ry, float a0, float a1, int steps = 48) {
  Stroke s;
  s.reserve(static_cast<size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const float t = a0 + (a1 - a0) * static_cast<float>(i) / static_cast<float>(steps);
    s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return s;
}

inline Stroke bezier(Pt a, Pt c, Pt b, int steps = 32) {
  Stroke s;
  s.reserve(static_cast<size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const float t = static_cast<float>(i) / static_cast<float>(steps);
    const float u = 1.0f - t;
    s.push_back({u * u * a.x + 2 * u * t * c.x + t * t * b.x, u * u * a.y + 2 * u * t * c.y + t * t * b.y});
  }
  return s;
}

inline const std::array<std::vector<Stroke>, 10>& glyphs() {
  static const float kPi = 3.14159265f;
  static const std::array<std::vector<Stroke>, 10> g = {{
      // 0
      {arc(0.50f, 0.50f, 0.22f, 0.33f, 0.0f, 2.0f * kPi, 72)},
      // 1
      {line({0.50f, 0.08f}, {0.50f, 0.92f}), line({0.34f, 0.24f}, {0.50f, 0.08f})},
      // 2
      {arc(0.50f, 0.30f, 0.21f, 0.20f, kPi, 2.35f * kPi), line({0.67f, 0.42f}, {0.28f, 0.88f}),
       line({0.28f, 0.88f}, {0.74f, 0.88f})},
      // 3
      {arc(0.48f, 0.30f, 0.20f, 0.20f, kPi, 2.5f * kPi), arc(0.48f, 0.70f, 0.21f, 0.21f, 1.5f * kPi, 3.0f * kPi)},
      // 4
      {line({0.62f, 0.08f}, {0.30f, 0.60f}), line({0.30f, 0.60f}, {0.78f, 0.60f}),
       line({0.66f, 0.34f}, {0.66f, 0.92f})},
      // 5
      {line({0.70f, 0.12f}, {0.33f, 0.12f}), line({0.33f, 0.12f}, {0.31f, 0.45f}),
       arc(0.47f, 0.64f, 0.22f, 0.24f, 1.35f * kPi, 2.90f * kPi)},
      // 6
      {bezier({0.66f, 0.10f}, {0.32f, 0.18f}, {0.31f, 0.55f}), arc(0.50f, 0.67f, 0.20f, 0.21f, 0.0f, 2.0f * kPi, 64)},
      // 7
      {line({0.28f, 0.12f}, {0.72f, 0.12f}), line({0.72f, 0.12f}, {0.42f, 0.90f}),
       line({0.38f, 0.50f}, {0.62f, 0.50f})},
      // 8
      {arc(0.50f, 0.30f, 0.17f, 0.17f, 0.0f, 2.0f * kPi, 56), arc(0.50f, 0.68f, 0.21f, 0.21f, 0.0f, 2.0f * kPi, 64)},
      // 9
      {arc(0.50f, 0.32f, 0.19f, 0.19f, 0.0f, 2.0f * kPi, 56), bezier({0.69f, 0.32f}, {0.67f, 0.70f}, {0.52f, 0.90f})},
  }};
  return g;
}

// Renders one digit with random affine jitter (rotation, anisotropic scale,
// shear, translation), stroke offset jitter, pen width and ink variation.
inline void render_digit(int digit, Rng& rng, uint8_t* out28) {
  std::fill(out28, out28 + 28 * 28, uint8_t{0});
  const float rot = rng.normal(0.0f, 0.10f);
  const float sx = 1.0f + rng.normal(0.0f, 0.09f);
  const float sy = 1.0f + rng.normal(0.0f, 0.09f);
  const float shear = rng.normal(0.0f, 0.10f);
  const float tx = rng.normal(0.0f, 0.035f);
  const float ty = rng.normal(0.0f, 0.035f);
  const float cr = std::cos(rot), sr = std::sin(rot);
  const float radius = 1.0f + 0.9f * rng.uniform_float();        // pen radius in pixels
  const float ink = 0.72f + 0.28f * rng.uniform_float();         // peak intensity scale
  float acc[28 * 28] = {0};
  for (const Stroke& stroke : glyphs()[static_cast<size_t>(digit)]) {
    const float ox = rng.normal(0.0f, 0.012f);
    const float oy = rng.normal(0.0f, 0.012f);
    float px = 0.0f, py = 0.0f;
    bool have_prev = false;
    for (const Pt& p : stroke) {
      // jitter, then affine about the glyph center, then map to pixel space
      float u = p.x + ox - 0.5f;
      float v = p.y + oy - 0.5f;
      u += shear * v;
      u *= sx;
      v *= sy;
      const float rx = cr * u - sr * v + 0.5f + tx;
      const float ry = sr * u + cr * v + 0.5f + ty;
      const float X = 2.0f + rx * 24.0f;
      const float Y = 2.0f + ry * 24.0f;
      if (have_prev) {
        const float dx = X - px, dy = Y - py;
        const float len = std::sqrt(dx * dx + dy * dy);
        const int steps = std::max(1, static_cast<int>(len / 0.35f));
        for (int i = 1; i <= steps; ++i) {
          const float t = static_cast<float>(i) / static_cast<float>(steps);
          const float qx = px + dx * t, qy = py + dy * t;
          const int x0 = std::max(0, static_cast<int>(qx - radius - 1.0f));
          const int x1 = std::min(27, static_cast<int>(qx + radius + 1.0f));
          const int y0 = std::max(0, static_cast<int>(qy - radius - 1.0f));
          const int y1 = std::min(27, static_cast<int>(qy + radius + 1.0f));
          for (int yy = y0; yy <= y1; ++yy) {
            for (int xx = x0; xx <= x1; ++xx) {
              const float d = std::sqrt((xx - qx) * (xx - qx) + (yy - qy) * (yy - qy));
              const float cov = std::clamp(radius + 0.5f - d, 0.0f, 1.0f);
              float& a = acc[yy * 28 + xx];
              a = std::max(a, cov);
            }
          }
        }
      }
      px = X;
      py = Y;
      have_prev = true;
    }
  }
  for (int i = 0; i < 28 * 28; ++i)
    out28[i] = static_cast<uint8_t>(std::clamp(acc[i] * ink * 255.0f, 0.0f, 255.0f));
}

}  // namespace detail

struct SynthCorpus {
  std::vector<uint8_t> train_pixels, train_labels;
  std::vector<uint8_t> test_pixels, test_labels;
};

inline SynthCorpus make_corpus(const SynthSpec& spec = {}) {
  SynthCorpus c;
  const int64_t n_train = int64_t{10} * spec.train_per_class;
  const int64_t n_test = int64_t{10} * spec.test_per_class;
  auto fill = [&](int per_class, int64_t index_offset, std::vector<uint8_t>& pixels,
                  std::vector<uint8_t>& labels, uint64_t shuffle_stream) {
    const int64_t n = int64_t{10} * per_class;
    labels.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) labels[static_cast<size_t>(i)] = static_cast<uint8_t>(i / per_class);
    Rng shuffler = Rng::derive(spec.seed, shuffle_stream);
    shuffler.shuffle(labels);
    pixels.resize(static_cast<size_t>(n) * 784);
    for (int64_t i = 0; i < n; ++i) {
      Rng rng = Rng::derive(spec.seed, static_cast<uint64_t>(index_offset + i));
      detail::render_digit(labels[static_cast<size_t>(i)], rng, pixels.data() + i * 784);
    }
  };
  fill(spec.train_per_class, 0, c.train_pixels, c.train_labels, 0xABCDu);
  fill(spec.test_per_class, n_train, c.test_pixels, c.test_labels, 0xBEEFu);
  (void)n_test;
  return c;
}

// Writes the four conventional IDX files under dir (as for a real corpus
// rooted at a data directory: dir/train-images-idx3-ubyte etc.).
inline void write_synthetic_idx(const std::string& dir, const SynthSpec& spec = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const SynthCorpus c = make_corpus(spec);
  const fs::path base(dir);
  write_idx_images((base / "train-images-idx3-ubyte").string(),
                   static_cast<int64_t>(c.train_labels.size()), 28, 28, c.train_pixels);
  write_idx_labels((base / "train-labels-idx1-ubyte").string(), c.train_labels);
  write_idx_images((base / "t10k-images-idx3-ubyte").string(), static_cast<int64_t>(c.test_labels.size()), 28,
                   28, c.test_pixels);
  write_idx_labels((base / "t10k-labels-idx1-ubyte").string(), c.test_labels);
}

}  // namespace chroma::synth
