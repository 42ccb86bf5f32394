#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "biterr/quantization.hpp"

// Bit error injection into quantized weight codes.
//
// A ChipField models one physical memory instance: a field of uniform
// variates u(i, j) in [0, 1), one per stored bit, realized lazily from a
// counter-based generator keyed on the chip seed. Thresholding the field at
// rate p yields that chip's error set; because the variates are fixed per
// chip, the errors at p' <= p are a subset of those at p (bit errors are
// persistent across voltages). Bit j of weight i flips iff u(i, j) <= p;
// only the m stored bits are memory cells, the masked high bits are not.

namespace biterr::faults {

class ChipField {
 public:
  ChipField(std::uint64_t chip_seed, std::size_t weight_count, int bits_per_weight);

  std::uint64_t seed() const { return chip_seed_; }
  std::size_t weight_count() const { return weight_count_; }
  int bits_per_weight() const { return bits_per_weight_; }

  // The uniform variate of bit j of weight i.
  double u(std::size_t i, int j) const;

  // XOR mask over the m stored bits of weight i at error rate p.
  std::uint8_t flip_mask(std::size_t i, double p) const;

 private:
  std::uint64_t chip_seed_;
  std::size_t weight_count_;
  int bits_per_weight_;
};

// Evaluation panel: chip c is keyed by a pure function of (master_seed, c).
std::vector<ChipField> sample_chips(std::uint64_t master_seed, int count,
                                    std::size_t weight_count, int bits_per_weight);

struct InjectionReport {
  std::size_t flipped_bits = 0;
  double expected_flips = 0.0;  // p * m * W
  std::size_t affected_weights = 0;
};

// Flips each stored bit independently at rate p. The input is untouched;
// the report counts are exact. Throws on a chip/tensor geometry mismatch or
// p outside [0, 1].
quant::QuantizedTensor inject_random(const quant::QuantizedTensor& codes,
                                     const ChipField& chip, double p,
                                     InjectionReport* report = nullptr);

// Measured per-cell flip probabilities of a physical memory array.
struct ProfiledMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> p01;  // 0-to-1 flip probability per cell, row-major
  std::vector<double> p10;  // 1-to-0 flip probability per cell
  std::string label;

  std::size_t cells() const { return rows * cols; }
};

// Text format: first non-comment line "rows cols", then rows*cols lines
// "p01 p10" in row-major order. '#' starts a comment line. Probabilities
// must be finite and in [0, 1].
ProfiledMap load_profiled_map(std::istream& in, const std::string& label = {});
ProfiledMap load_profiled_map_file(const std::string& path);

// Replays a profiled map against linearly mapped weights: bit j of weight i
// lands in cell k = (offset + i*m + j) mod (rows*cols). A cell with a
// fractional probability is Bernoulli-sampled once per (map, offset,
// sample_seed) triple -- one fixed chip instance -- so repeated injection is
// bit-identical. Cells at probability 1 always flip, at 0 never.
quant::QuantizedTensor inject_profiled(const quant::QuantizedTensor& codes,
                                       const ProfiledMap& map, std::size_t offset,
                                       std::uint64_t sample_seed);

// Uniform noise in [-eps_rel * R, eps_rel * R] added to every weight, with R
// the weight range (max - min) of the weight's group. Unlike sparse bit
// errors this perturbs all weights.
std::vector<double> inject_linf(std::span<const double> weights,
                                std::span<const quant::GroupRange> groups,
                                double eps_rel, std::uint64_t seed);

}  // namespace biterr::faults
