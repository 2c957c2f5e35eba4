#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "chroma/binio.hpp"
#include "chroma/rng.hpp"

namespace chroma {

// The three colorization procedures. Serialized names are exactly these
// strings.
enum class ColorScheme { GreenOnly, RandomSingleChannel, HorizontalThirds };

inline const char* scheme_name(ColorScheme s) {
  switch (s) {
    case ColorScheme::GreenOnly: return "GreenOnly";
    case ColorScheme::RandomSingleChannel: return "RandomSingleChannel";
    default: return "HorizontalThirds";
  }
}

inline ColorScheme scheme_from_name(const std::string& name) {
  if (name == "GreenOnly") return ColorScheme::GreenOnly;
  if (name == "RandomSingleChannel") return ColorScheme::RandomSingleChannel;
  if (name == "HorizontalThirds") return ColorScheme::HorizontalThirds;
  throw FormatError("unknown color scheme name: " + name);
}

// Short dataset ids: green/single/thirds -> 1/2/3, mnist -> MD, fashion -> FD.
inline std::string dataset_id(const std::string& source, ColorScheme scheme) {
  const std::string prefix = source == "fashionmnist" ? "FD" : "MD";
  switch (scheme) {
    case ColorScheme::GreenOnly: return prefix + "1";
    case ColorScheme::RandomSingleChannel: return prefix + "2";
    default: return prefix + "3";
  }
}

struct Provenance {
  std::string source;  // "mnist" | "fashionmnist"
  std::string split;   // "train" | "val" | "test"
  ColorScheme scheme = ColorScheme::GreenOnly;
  uint64_t seed = 0;
  int64_t val_size = 5000;
  bool column_bands = false;
};

// Colorized images: u8 pixels, channel-major [3,32,32] per record.
class LabeledDataset {
 public:
  static constexpr int64_t kChannels = 3, kHeight = 32, kWidth = 32;
  static constexpr int64_t kImageBytes = kChannels * kHeight * kWidth;

  std::vector<uint8_t> pixels;  // count * kImageBytes
  std::vector<uint8_t> labels;  // values in [0,10)
  Provenance provenance;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
  const uint8_t* image(int64_t i) const { return pixels.data() + i * kImageBytes; }
  uint8_t* image(int64_t i) { return pixels.data() + i * kImageBytes; }

  // First n records, provenance carried over.
  LabeledDataset subset(int64_t n) const {
    if (n > size()) n = size();
    LabeledDataset out;
    out.provenance = provenance;
    out.labels.assign(labels.begin(), labels.begin() + n);
    out.pixels.assign(pixels.begin(), pixels.begin() + n * kImageBytes);
    return out;
  }

  std::string id() const { return dataset_id(provenance.source, provenance.scheme); }
};

// ---------------------------------------------------------------------------
// IDX (the MNIST container format): big-endian u32 header fields.

struct IdxImages {
  int64_t count = 0, rows = 0, cols = 0;
  std::vector<uint8_t> pixels;  // count * rows * cols
};

inline IdxImages read_idx_images(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  const uint32_t magic = binio::get_u32be(is, "idx magic");
  if (magic != 0x00000803u)
    throw FormatError(path + ": bad image magic (expected 0x00000803)");
  IdxImages out;
  out.count = binio::get_u32be(is, "idx count");
  out.rows = binio::get_u32be(is, "idx rows");
  out.cols = binio::get_u32be(is, "idx cols");
  out.pixels.resize(static_cast<size_t>(out.count * out.rows * out.cols));
  binio::read_exact(is, out.pixels.data(), out.pixels.size(), "idx pixel payload");
  return out;
}

inline std::vector<uint8_t> read_idx_labels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  const uint32_t magic = binio::get_u32be(is, "idx magic");
  if (magic != 0x00000801u)
    throw FormatError(path + ": bad label magic (expected 0x00000801)");
  const uint32_t count = binio::get_u32be(is, "idx count");
  std::vector<uint8_t> labels(count);
  binio::read_exact(is, labels.data(), labels.size(), "idx label payload");
  return labels;
}

// Reads an image/label file pair, cross-validating the counts and enforcing
// the 28x28 geometry.
inline std::pair<IdxImages, std::vector<uint8_t>> read_idx(const std::string& images_path,
                                                           const std::string& labels_path) {
  IdxImages images = read_idx_images(images_path);
  std::vector<uint8_t> labels = read_idx_labels(labels_path);
  if (images.count != static_cast<int64_t>(labels.size()))
    throw FormatError("count mismatch: " + std::to_string(images.count) + " images vs " +
                      std::to_string(labels.size()) + " labels");
  if (images.rows != 28 || images.cols != 28)
    throw FormatError(images_path + ": expected 28x28 images, got " + std::to_string(images.rows) + "x" +
                      std::to_string(images.cols));
  return {std::move(images), std::move(labels)};
}

inline void write_idx_images(const std::string& path, int64_t count, int64_t rows, int64_t cols,
                             const std::vector<uint8_t>& pixels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path);
  binio::put_u32be(os, 0x00000803u);
  binio::put_u32be(os, static_cast<uint32_t>(count));
  binio::put_u32be(os, static_cast<uint32_t>(rows));
  binio::put_u32be(os, static_cast<uint32_t>(cols));
  binio::write_bytes(os, pixels.data(), pixels.size());
}

inline void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path);
  binio::put_u32be(os, 0x00000801u);
  binio::put_u32be(os, static_cast<uint32_t>(labels.size()));
  binio::write_bytes(os, labels.data(), labels.size());
}

// ---------------------------------------------------------------------------
// Colorizers. All operate on byte images; the single nonzero channel at each
// pixel carries the original grayscale value, so the per-pixel channel sum
// always reproduces the source image.

// 28x28 -> 32x32 with a 2-pixel zero border.
inline void pad_to_32(const uint8_t* src28, uint8_t* dst32) {
  std::memset(dst32, 0, 32 * 32);
  for (int r = 0; r < 28; ++r) std::memcpy(dst32 + (r + 2) * 32 + 2, src28 + r * 28, 28);
}

// Channel G carries the source; R and B stay zero.
inline void colorize_green(const uint8_t* img32, uint8_t* out) {
  std::memset(out, 0, 3 * 32 * 32);
  std::memcpy(out + 1 * 32 * 32, img32, 32 * 32);
}

// One channel chosen uniformly from {R,G,B} carries the source.
inline void colorize_single_random(const uint8_t* img32, Rng& rng, uint8_t* out) {
  std::memset(out, 0, 3 * 32 * 32);
  const uint32_t channel = rng.uniform_u32(3);
  std::memcpy(out + channel * 32 * 32, img32, 32 * 32);
}

// Three bands (rows [0,11), [11,22), [22,32); columns when column_bands) are
// routed into the channels given by a uniform random permutation of (0,1,2).
inline void colorize_thirds(const uint8_t* img32, Rng& rng, uint8_t* out, bool column_bands = false) {
  std::memset(out, 0, 3 * 32 * 32);
  std::vector<uint8_t> perm = {0, 1, 2};
  rng.shuffle(perm);
  static constexpr int kEdges[4] = {0, 11, 22, 32};
  for (int band = 0; band < 3; ++band) {
    const int c = perm[static_cast<size_t>(band)];
    uint8_t* plane = out + c * 32 * 32;
    if (column_bands) {
      for (int r = 0; r < 32; ++r)
        for (int j = kEdges[band]; j < kEdges[band + 1]; ++j) plane[r * 32 + j] = img32[r * 32 + j];
    } else {
      for (int r = kEdges[band]; r < kEdges[band + 1]; ++r)
        std::memcpy(plane + r * 32, img32 + r * 32, 32);
    }
  }
}

// ---------------------------------------------------------------------------
// Dataset assembly.

struct DataSource {
  std::string name;  // "mnist" | "fashionmnist"
  std::string train_images, train_labels;
  std::string test_images, test_labels;

  // Conventional filenames under dir/name/.
  static DataSource standard(const std::string& name, const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path base = fs::path(dir) / name;
    DataSource s;
    s.name = name;
    s.train_images = (base / "train-images-idx3-ubyte").string();
    s.train_labels = (base / "train-labels-idx1-ubyte").string();
    s.test_images = (base / "t10k-images-idx3-ubyte").string();
    s.test_labels = (base / "t10k-labels-idx1-ubyte").string();
    return s;
  }
};

struct BuildOptions {
  int64_t val_size = 5000;   // held out from the tail of the train file
  bool column_bands = false;
};

// Reads the IDX source for the requested split, pads each image to 32x32 and
// applies the colorizer with a per-image stream derived from (seed, index in
// the source file). Pure function of the source bytes and arguments.
inline LabeledDataset build_dataset(const DataSource& source, const std::string& split, ColorScheme scheme,
                                    uint64_t seed, const BuildOptions& opts = {}) {
  const bool from_train_file = split == "train" || split == "val";
  if (!from_train_file && split != "test")
    throw std::invalid_argument("build_dataset: unknown split \"" + split + "\"");
  auto [images, labels] = from_train_file ? read_idx(source.train_images, source.train_labels)
                                          : read_idx(source.test_images, source.test_labels);
  int64_t begin = 0, end = images.count;
  if (split == "train") {
    end = std::max<int64_t>(0, images.count - opts.val_size);
  } else if (split == "val") {
    begin = std::max<int64_t>(0, images.count - opts.val_size);
  }
  LabeledDataset ds;
  ds.provenance = {source.name, split, scheme, seed, opts.val_size, opts.column_bands};
  const int64_t count = end - begin;
  ds.labels.resize(static_cast<size_t>(count));
  ds.pixels.resize(static_cast<size_t>(count * LabeledDataset::kImageBytes));
  uint8_t padded[32 * 32];
  for (int64_t i = 0; i < count; ++i) {
    const int64_t file_index = begin + i;
    pad_to_32(images.pixels.data() + file_index * 28 * 28, padded);
    uint8_t* out = ds.image(i);
    Rng rng = Rng::derive(seed, static_cast<uint64_t>(file_index));
    switch (scheme) {
      case ColorScheme::GreenOnly: colorize_green(padded, out); break;
      case ColorScheme::RandomSingleChannel: colorize_single_random(padded, rng, out); break;
      case ColorScheme::HorizontalThirds: colorize_thirds(padded, rng, out, opts.column_bands); break;
    }
    ds.labels[static_cast<size_t>(i)] = labels[static_cast<size_t>(file_index)];
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset container ("CMDS"): little-endian header fields, u8 records, CRC32
// of the record payload, JSON sidecar manifest at <path>.json.

inline nlohmann::json dataset_manifest(const LabeledDataset& ds) {
  return nlohmann::json{{"format", "cmds"},
                        {"version", 1},
                        {"dataset_id", ds.id()},
                        {"source", ds.provenance.source},
                        {"split", ds.provenance.split},
                        {"scheme", scheme_name(ds.provenance.scheme)},
                        {"seed", ds.provenance.seed},
                        {"count", ds.size()},
                        {"channels", LabeledDataset::kChannels},
                        {"height", LabeledDataset::kHeight},
                        {"width", LabeledDataset::kWidth},
                        {"params", {{"val_size", ds.provenance.val_size}, {"column_bands", ds.provenance.column_bands}}}};
}

inline void write_dataset(const LabeledDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path);
  os.write("CMDS", 4);
  binio::put_u16le(os, 1);
  const uint8_t channels = LabeledDataset::kChannels;
  binio::write_bytes(os, &channels, 1);
  binio::put_u16le(os, LabeledDataset::kHeight);
  binio::put_u16le(os, LabeledDataset::kWidth);
  binio::put_u32le(os, static_cast<uint32_t>(ds.size()));
  uint32_t crc = 0;
  for (int64_t i = 0; i < ds.size(); ++i) {
    const uint8_t label = ds.labels[static_cast<size_t>(i)];
    binio::write_bytes(os, &label, 1);
    binio::write_bytes(os, ds.image(i), LabeledDataset::kImageBytes);
    crc = crc32(&label, 1, crc);
    crc = crc32(ds.image(i), LabeledDataset::kImageBytes, crc);
  }
  binio::put_u32le(os, crc);
  if (!os) throw FormatError("write failure on " + path);
  std::ofstream ms(path + ".json");
  if (!ms) throw FormatError("cannot write " + path + ".json");
  ms << dataset_manifest(ds).dump(2) << "\n";
}

inline LabeledDataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  char magic[4];
  binio::read_exact(is, magic, 4, "container magic");
  if (std::memcmp(magic, "CMDS", 4) != 0) throw FormatError(path + ": bad container magic");
  const uint16_t version = binio::get_u16le(is, "container version");
  if (version != 1) throw FormatError(path + ": unsupported container version " + std::to_string(version));
  uint8_t channels;
  binio::read_exact(is, &channels, 1, "container channels");
  const uint16_t height = binio::get_u16le(is, "container height");
  const uint16_t width = binio::get_u16le(is, "container width");
  if (channels != LabeledDataset::kChannels || height != LabeledDataset::kHeight ||
      width != LabeledDataset::kWidth)
    throw FormatError(path + ": unexpected geometry " + std::to_string(channels) + "x" + std::to_string(height) +
                      "x" + std::to_string(width));
  const uint32_t count = binio::get_u32le(is, "container count");
  LabeledDataset ds;
  ds.labels.resize(count);
  ds.pixels.resize(static_cast<size_t>(count) * LabeledDataset::kImageBytes);
  uint32_t crc = 0;
  for (uint32_t i = 0; i < count; ++i) {
    binio::read_exact(is, &ds.labels[i], 1, "record label");
    binio::read_exact(is, ds.image(i), LabeledDataset::kImageBytes, "record pixels");
    crc = crc32(&ds.labels[i], 1, crc);
    crc = crc32(ds.image(i), LabeledDataset::kImageBytes, crc);
  }
  const uint32_t stored = binio::get_u32le(is, "container checksum");
  if (stored != crc) throw FormatError(path + ": checksum mismatch");
  std::ifstream ms(path + ".json");
  if (!ms) throw FormatError(path + ".json: manifest missing");
  nlohmann::json manifest = nlohmann::json::parse(ms, nullptr, false);
  if (manifest.is_discarded()) throw FormatError(path + ".json: manifest is not valid JSON");
  ds.provenance.source = manifest.value("source", "");
  ds.provenance.split = manifest.value("split", "");
  ds.provenance.scheme = scheme_from_name(manifest.value("scheme", "GreenOnly"));
  ds.provenance.seed = manifest.value("seed", uint64_t{0});
  if (manifest.contains("params")) {
    ds.provenance.val_size = manifest["params"].value("val_size", int64_t{5000});
    ds.provenance.column_bands = manifest["params"].value("column_bands", false);
  }
  if (manifest.value("count", int64_t{-1}) != ds.size())
    throw FormatError(path + ".json: manifest count disagrees with container");
  return ds;
}

}  // namespace chroma
