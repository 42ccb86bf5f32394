#pragma once

#include <cstdint>
#include <vector>

#include "biterr/dataset.hpp"

// Deterministic synthetic digit images, 28x28 grayscale, 10 classes.
// Each sample renders a 5x7 digit glyph through a random affine transform
// (scale, rotation, translation) with bilinear sampling, a random foreground
// intensity and additive Gaussian pixel noise. Entirely reproducible from
// the seed, so train/eval experiments are portable without shipping data.

namespace biterr::io {

struct SynthOptions {
  std::size_t count = 10000;
  std::uint64_t seed = 7;
  double noise_sigma = 0.10;
  double min_scale = 2.0;
  double max_scale = 3.2;
  double max_rotation = 0.35;  // radians
};

// Pixels are bytes (0..255), labels 0..9, both of length count (x784).
void generate_synth_digits(const SynthOptions& opt, std::vector<std::uint8_t>& pixels_out,
                           std::vector<std::uint8_t>& labels_out);

// Convenience: generate and return as a loaded Dataset (pixels in [0, 1]).
Dataset synth_digits_dataset(const SynthOptions& opt);

}  // namespace biterr::io
