#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "biterr/network.hpp"
#include "biterr/quantization.hpp"

// Binary model checkpoints.
//
// BNN1 record: magic "BNN1", layer count (u32 LE), per-layer dims as
// (in, out) pairs (u64 LE), then per layer the row-major weight matrix
// followed by the bias vector, doubles in IEEE-754 little-endian.
//
// BQT1 record (appended when the model is saved post-quantization): magic
// "BQT1", precision m (1 byte), scheme enums (3 bytes: range mode, integer
// representation, rounding), group count (u32 LE), per group qmin and qmax
// (f64 LE) and start/end indices (u64 LE), then one code byte per weight.
// Granularity is implied: a single group spanning all weights is Global.

namespace biterr::io {

struct Checkpoint {
  net::Architecture arch;
  std::vector<double> weights;
  std::optional<quant::QuantizedTensor> quantized;
};

void write_bqt(std::ostream& out, const quant::QuantizedTensor& q);
quant::QuantizedTensor read_bqt(std::istream& in);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace biterr::io
