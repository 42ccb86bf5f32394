#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

// Fixed-point weight quantization.
//
// Weights are stored as m-bit integer codes (2 <= m <= 8) inside uint8_t
// words; the 8-m most significant bits are always zero after encoding, so
// bit errors only ever touch the m stored bits. Four independent scheme
// axes are supported:
//
//   granularity   Global (one range for everything) or PerGroup
//                 (per-layer weights and biases are separate groups)
//   range_mode    Symmetric [-qmax, qmax] or Asymmetric [qmin, qmax]
//   integer_repr  two's-complement signed or offset-unsigned codes
//   rounding      Truncate (floor) or RoundNearest (half away from zero)
//
// Symmetric signed encoding with step delta = qmax / (2^(m-1) - 1):
//   v = floor(w / delta)  or  round(w / delta), stored as two's complement.
// Asymmetric ranges are first remapped to [-1, 1] via
//   N(w) = 2 (w - qmin) / (qmax - qmin) - 1
// and encoded with qmax = 1. The unsigned representation adds 2^(m-1) - 1,
// giving codes in {0, ..., 2 (2^(m-1) - 1)}; the top code 2^m - 1 is never
// produced by the encoder but decodes fine (bit errors can produce it).
//
// Decoding is total over all 2^m code words for every scheme.

namespace biterr::quant {

enum class Granularity : std::uint8_t { Global = 0, PerGroup = 1 };
enum class RangeMode : std::uint8_t { Symmetric = 0, Asymmetric = 1 };
enum class IntegerRepr : std::uint8_t { SignedTwosComplement = 0, Unsigned = 1 };
enum class Rounding : std::uint8_t { Truncate = 0, RoundNearest = 1 };

struct QuantScheme {
  int precision_m = 8;
  Granularity granularity = Granularity::PerGroup;
  RangeMode range_mode = RangeMode::Symmetric;
  IntegerRepr integer_repr = IntegerRepr::SignedTwosComplement;
  Rounding rounding = Rounding::Truncate;

  // Validates the axes (m in [2,8]; Unsigned requires Asymmetric).
  static QuantScheme make(int m, Granularity g, RangeMode r, IntegerRepr i, Rounding rnd);

  // Per-layer symmetric signed truncation: the conventional reference.
  static QuantScheme normal(int m = 8);
  // Per-group asymmetric unsigned with rounding: the robust scheme.
  static QuantScheme rquant(int m = 8);

  bool operator==(const QuantScheme&) const = default;
  std::string to_string() const;
};

// Fitted range of one weight group, in weight units.
struct QuantParams {
  double qmin = -1.0;
  double qmax = 1.0;

  // Step size: qmax / (2^(m-1) - 1) for symmetric ranges; for asymmetric
  // ranges the step of the normalized [-1, 1] domain, 1 / (2^(m-1) - 1).
  double step(const QuantScheme& s) const;
  // Step expressed in weight units for either range mode (round-trip bounds
  // are stated against this).
  double step_weight_units(const QuantScheme& s) const;
};

// Half-open index range [begin, end) identifying one weight group.
struct GroupRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const GroupRange&) const = default;
};

struct QuantizedTensor {
  std::vector<std::uint8_t> codes;     // one word per weight, top 8-m bits zero
  std::vector<QuantParams> params;     // one per group
  std::vector<GroupRange> groups;
  QuantScheme scheme;

  std::size_t weight_count() const { return codes.size(); }
};

// Largest positive level, 2^(m-1) - 1 (127 for m = 8).
int max_level(int m);

// Mask selecting the m stored (low) bits.
std::uint8_t code_mask(int m);

// Group layout actually used under the scheme: Global collapses everything
// into a single group spanning [0, total_weights).
std::vector<GroupRange> effective_groups(const QuantScheme& scheme,
                                         std::span<const GroupRange> natural_groups,
                                         std::size_t total_weights);

// Fits [qmin, qmax] per group. Symmetric: qmax = max |w|, qmin = -qmax.
// Asymmetric: [min w, max w]. A degenerate group (all values equal) gets an
// artificial half-width max(|w|, 2^-24) so the step never collapses to zero.
// Throws on an empty group or a non-finite weight, naming the group.
std::vector<QuantParams> fit_range(std::span<const double> weights,
                                   std::span<const GroupRange> groups,
                                   const QuantScheme& scheme);

// Encodes every weight to its m-bit code. Out-of-range inputs are clamped to
// [qmin, qmax] first (a safety net; ranges are refit each training step).
QuantizedTensor quantize(std::span<const double> weights,
                         std::span<const GroupRange> groups,
                         std::span<const QuantParams> params,
                         const QuantScheme& scheme);

// Total inverse: decodes all 2^m code values, including words corrupted by
// bit errors. Decoded values may fall slightly outside [qmin, qmax].
std::vector<double> dequantize(const QuantizedTensor& q);
void dequantize(const QuantizedTensor& q, std::span<double> out);

// dequantize(quantize(w)) with freshly fitted ranges; idempotent on its own
// output.
std::vector<double> fake_quantize(std::span<const double> weights,
                                  std::span<const GroupRange> groups,
                                  const QuantScheme& scheme);
void fake_quantize(std::span<const double> weights,
                   std::span<const GroupRange> groups,
                   const QuantScheme& scheme, std::span<double> out);

// Scalar encode/decode of a single weight under known params. These are the
// building blocks of the vector paths above, exposed for tools and tests.
std::uint8_t encode_one(double w, const QuantParams& p, const QuantScheme& s);
double decode_one(std::uint8_t code, const QuantParams& p, const QuantScheme& s);

}  // namespace biterr::quant
