#include "biterr/dataset.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace biterr::io {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16),
                             std::uint8_t(v >> 8), std::uint8_t(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in, const std::string& path) {
  z_stream zs{};
  // 15 + 16: zlib header detection off, gzip wrapper on
  if (inflateInit2(&zs, 15 + 16) != Z_OK) {
    throw std::runtime_error("idx: inflateInit failed for " + path);
  }
  std::vector<std::uint8_t> out;
  out.reserve(in.size() * 4);
  std::uint8_t buf[1 << 16];
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw std::runtime_error("idx: corrupt gzip stream in " + path);
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

}  // namespace

std::vector<std::uint8_t> read_file_maybe_gzip(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open " + path);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (data.size() >= 2 && data[0] == 0x1f && data[1] == 0x8b) {
    return gunzip(data, path);
  }
  return data;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_file_maybe_gzip(images_path);
  const auto lab = read_file_maybe_gzip(labels_path);

  if (img.size() < 16) throw std::runtime_error("idx: truncated image header in " + images_path);
  if (read_be32(img.data()) != kImagesMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08x", read_be32(img.data()));
    throw std::runtime_error("idx: bad image magic " + std::string(buf) + " in " + images_path);
  }
  const std::size_t n = read_be32(img.data() + 4);
  const std::size_t rows = read_be32(img.data() + 8);
  const std::size_t cols = read_be32(img.data() + 12);
  if (img.size() != 16 + n * rows * cols) {
    throw std::runtime_error("idx: image payload size mismatch in " + images_path);
  }

  if (lab.size() < 8) throw std::runtime_error("idx: truncated label header in " + labels_path);
  if (read_be32(lab.data()) != kLabelsMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08x", read_be32(lab.data()));
    throw std::runtime_error("idx: bad label magic " + std::string(buf) + " in " + labels_path);
  }
  const std::size_t nl = read_be32(lab.data() + 4);
  if (lab.size() != 8 + nl) throw std::runtime_error("idx: label payload size mismatch in " + labels_path);
  if (nl != n) {
    throw std::runtime_error("idx: image/label count mismatch (" + std::to_string(n) + " vs " +
                             std::to_string(nl) + ")");
  }

  Dataset ds;
  ds.count = n;
  ds.rows = rows;
  ds.cols = cols;
  ds.pixels.resize(n * rows * cols);
  for (std::size_t i = 0; i < ds.pixels.size(); ++i) {
    ds.pixels[i] = static_cast<double>(img[16 + i]) / 255.0;
  }
  ds.labels.assign(lab.begin() + 8, lab.end());
  return ds;
}

Dataset Dataset::subset(std::size_t n) const {
  Dataset out;
  out.count = std::min(n, count);
  out.rows = rows;
  out.cols = cols;
  out.pixels.assign(pixels.begin(),
                    pixels.begin() + static_cast<std::ptrdiff_t>(out.count * dim()));
  out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(out.count));
  return out;
}

void write_idx_images(const std::string& path, std::size_t count, std::size_t rows,
                      std::size_t cols, const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != count * rows * cols) {
    throw std::invalid_argument("idx: pixel buffer does not match geometry");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot write " + path);
  write_be32(out, kImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(count));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot write " + path);
  write_be32(out, kLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

}  // namespace biterr::io
