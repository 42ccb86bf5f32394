#include "biterr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace biterr::io {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8), std::uint8_t(v >> 16),
                             std::uint8_t(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = std::uint8_t(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated record");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
  std::uint8_t b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated record");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void expect_magic(std::istream& in, const char* magic, const char* what) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0) {
    throw std::runtime_error(std::string("checkpoint: missing ") + what + " magic");
  }
}

}  // namespace

void write_bqt(std::ostream& out, const quant::QuantizedTensor& q) {
  out.write("BQT1", 4);
  const std::uint8_t head[4] = {
      static_cast<std::uint8_t>(q.scheme.precision_m),
      static_cast<std::uint8_t>(q.scheme.range_mode),
      static_cast<std::uint8_t>(q.scheme.integer_repr),
      static_cast<std::uint8_t>(q.scheme.rounding),
  };
  out.write(reinterpret_cast<const char*>(head), 4);
  put_u32(out, static_cast<std::uint32_t>(q.groups.size()));
  for (std::size_t g = 0; g < q.groups.size(); ++g) {
    put_f64(out, q.params[g].qmin);
    put_f64(out, q.params[g].qmax);
    put_u64(out, q.groups[g].begin);
    put_u64(out, q.groups[g].end);
  }
  out.write(reinterpret_cast<const char*>(q.codes.data()),
            static_cast<std::streamsize>(q.codes.size()));
}

quant::QuantizedTensor read_bqt(std::istream& in) {
  expect_magic(in, "BQT1", "BQT1");
  std::uint8_t head[4];
  in.read(reinterpret_cast<char*>(head), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated BQT1 header");
  const std::uint32_t group_count = get_u32(in);
  if (group_count == 0) throw std::runtime_error("checkpoint: BQT1 with no groups");

  quant::QuantizedTensor q;
  q.groups.resize(group_count);
  q.params.resize(group_count);
  std::size_t total = 0;
  for (std::uint32_t g = 0; g < group_count; ++g) {
    q.params[g].qmin = get_f64(in);
    q.params[g].qmax = get_f64(in);
    q.groups[g].begin = get_u64(in);
    q.groups[g].end = get_u64(in);
    total = std::max(total, q.groups[g].end);
  }
  q.scheme = quant::QuantScheme::make(
      head[0], group_count == 1 ? quant::Granularity::Global : quant::Granularity::PerGroup,
      static_cast<quant::RangeMode>(head[1]), static_cast<quant::IntegerRepr>(head[2]),
      static_cast<quant::Rounding>(head[3]));
  q.codes.resize(total);
  in.read(reinterpret_cast<char*>(q.codes.data()), static_cast<std::streamsize>(total));
  if (!in) throw std::runtime_error("checkpoint: truncated BQT1 codes");
  return q;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write("BNN1", 4);
  const std::size_t layers = ckpt.arch.layer_count();
  put_u32(out, static_cast<std::uint32_t>(layers));
  for (std::size_t l = 0; l < layers; ++l) {
    put_u64(out, ckpt.arch.dims[l]);
    put_u64(out, ckpt.arch.dims[l + 1]);
  }
  if (ckpt.weights.size() != ckpt.arch.weight_count()) {
    throw std::invalid_argument("checkpoint: weight count does not match architecture");
  }
  for (double w : ckpt.weights) put_f64(out, w);
  if (ckpt.quantized) write_bqt(out, *ckpt.quantized);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  expect_magic(in, "BNN1", "BNN1");
  const std::uint32_t layers = get_u32(in);
  if (layers == 0 || layers > 64) throw std::runtime_error("checkpoint: bad layer count");

  Checkpoint ckpt;
  ckpt.arch.dims.resize(layers + 1);
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::uint64_t in_dim = get_u64(in);
    const std::uint64_t out_dim = get_u64(in);
    if (l > 0 && ckpt.arch.dims[l] != in_dim) {
      throw std::runtime_error("checkpoint: inconsistent layer dims");
    }
    ckpt.arch.dims[l] = in_dim;
    ckpt.arch.dims[l + 1] = out_dim;
  }
  ckpt.weights.resize(ckpt.arch.weight_count());
  for (auto& w : ckpt.weights) w = get_f64(in);

  // Optional BQT1 record follows.
  if (in.peek() != std::char_traits<char>::eof()) {
    ckpt.quantized = read_bqt(in);
    if (ckpt.quantized->weight_count() != ckpt.weights.size()) {
      throw std::runtime_error("checkpoint: BQT1 weight count mismatch");
    }
  }
  return ckpt;
}

}  // namespace biterr::io
