#pragma once

#include <cstdint>
#include <string>
#include <vector>

// IDX image/label ingestion (the standard MNIST distribution format).
// Images magic 0x00000803, labels magic 0x00000801, big-endian dimension
// words, raw unsigned bytes. Files ending in .gz (or starting with the gzip
// signature) are decompressed transparently. Pixels are scaled to [0, 1]
// doubles on load.

namespace biterr::io {

struct Dataset {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> pixels;        // count x (rows*cols), row-major, in [0, 1]
  std::vector<std::uint8_t> labels;  // count entries

  std::size_t dim() const { return rows * cols; }

  // First n examples (n capped at count).
  Dataset subset(std::size_t n) const;
};

Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Raw file -> byte vector, gunzipping when the gzip magic is present.
std::vector<std::uint8_t> read_file_maybe_gzip(const std::string& path);

// Writers for the same format (used by the dataset generator and tests).
void write_idx_images(const std::string& path, std::size_t count, std::size_t rows,
                      std::size_t cols, const std::vector<std::uint8_t>& pixels);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

}  // namespace biterr::io
