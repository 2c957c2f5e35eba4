#pragma once

// Small synthetic IDX corpora for unit tests, written once per process under
// the build tree's working directory.

#include <filesystem>
#include <string>

#include "chroma/datagen.hpp"
#include "chroma/synthdigits.hpp"

namespace testsupport {

// 300 train / 100 test images (30/10 per class).
inline const chroma::DataSource& mini_source() {
  static const chroma::DataSource source = [] {
    const std::string dir = "unit_fixture/mnist";
    if (!std::filesystem::exists(dir + "/train-images-idx3-ubyte")) {
      chroma::synth::SynthSpec spec;
      spec.train_per_class = 30;
      spec.test_per_class = 10;
      spec.seed = 7001;
      chroma::synth::write_synthetic_idx(dir, spec);
    }
    return chroma::DataSource::standard("mnist", "unit_fixture");
  }();
  return source;
}

inline chroma::BuildOptions mini_options() {
  chroma::BuildOptions opts;
  opts.val_size = 50;  // the fixture train file holds 300 images
  return opts;
}

}  // namespace testsupport
