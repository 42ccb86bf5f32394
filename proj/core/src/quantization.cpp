#include "biterr/quantization.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace biterr::quant {

namespace {

// Artificial half-width for a degenerate (all-equal) group.
constexpr double kDegenerateHalfWidth = 0x1.0p-24;

// Snap tolerance in the scaled (level) domain. Values this close to an
// integer level are treated as exactly on the grid, so re-encoding a decoded
// tensor reproduces the same codes under Truncate despite rounding noise in
// the range arithmetic. The cell width in this domain is 1.
constexpr double kGridSnap = 0x1.0p-30;

int round_level(double t, Rounding r, int m_max) {
  double v;
  if (r == Rounding::RoundNearest) {
    v = std::round(t);  // ties half away from zero
  } else {
    v = std::floor(t + kGridSnap);
  }
  if (v < -m_max) v = -m_max;
  if (v > m_max) v = m_max;
  return static_cast<int>(v);
}

// Normalized position of w in [qmin, qmax] mapped to [-1, 1].
double remap(double w, const QuantParams& p) {
  return (w - p.qmin) / (p.qmax - p.qmin) * 2.0 - 1.0;
}

double remap_inverse(double n, const QuantParams& p) {
  return p.qmin + (n + 1.0) * 0.5 * (p.qmax - p.qmin);
}

int sign_extend(std::uint8_t code, int m) {
  const int sign_bit = 1 << (m - 1);
  const int x = code & ((1 << m) - 1);
  return (x ^ sign_bit) - sign_bit;
}

void validate_groups(std::span<const GroupRange> groups, std::size_t total) {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].begin >= groups[g].end || groups[g].end > total) {
      throw std::invalid_argument("quant: group " + std::to_string(g) +
                                  " is empty or out of bounds");
    }
  }
}

}  // namespace

int max_level(int m) { return (1 << (m - 1)) - 1; }

std::uint8_t code_mask(int m) {
  return static_cast<std::uint8_t>((1u << m) - 1u);
}

QuantScheme QuantScheme::make(int m, Granularity g, RangeMode r, IntegerRepr i, Rounding rnd) {
  if (m < 2 || m > 8) {
    throw std::invalid_argument("quant: precision_m must be in [2, 8], got " + std::to_string(m));
  }
  if (i == IntegerRepr::Unsigned && r == RangeMode::Symmetric) {
    throw std::invalid_argument("quant: unsigned codes require an asymmetric range");
  }
  return QuantScheme{m, g, r, i, rnd};
}

QuantScheme QuantScheme::normal(int m) {
  return make(m, Granularity::PerGroup, RangeMode::Symmetric,
              IntegerRepr::SignedTwosComplement, Rounding::Truncate);
}

QuantScheme QuantScheme::rquant(int m) {
  return make(m, Granularity::PerGroup, RangeMode::Asymmetric,
              IntegerRepr::Unsigned, Rounding::RoundNearest);
}

std::string QuantScheme::to_string() const {
  std::string s;
  s += granularity == Granularity::Global ? "global" : "pergroup";
  s += range_mode == RangeMode::Symmetric ? "/symmetric" : "/asymmetric";
  s += integer_repr == IntegerRepr::SignedTwosComplement ? "/signed" : "/unsigned";
  s += rounding == Rounding::Truncate ? "/truncate" : "/nearest";
  s += "/m" + std::to_string(precision_m);
  return s;
}

double QuantParams::step(const QuantScheme& s) const {
  const double levels = max_level(s.precision_m);
  if (s.range_mode == RangeMode::Symmetric) return qmax / levels;
  return 1.0 / levels;
}

double QuantParams::step_weight_units(const QuantScheme& s) const {
  const double levels = max_level(s.precision_m);
  if (s.range_mode == RangeMode::Symmetric) return qmax / levels;
  return (qmax - qmin) * 0.5 / levels;
}

std::vector<GroupRange> effective_groups(const QuantScheme& scheme,
                                         std::span<const GroupRange> natural_groups,
                                         std::size_t total_weights) {
  if (scheme.granularity == Granularity::Global) {
    return {GroupRange{0, total_weights}};
  }
  return {natural_groups.begin(), natural_groups.end()};
}

std::vector<QuantParams> fit_range(std::span<const double> weights,
                                   std::span<const GroupRange> groups,
                                   const QuantScheme& scheme) {
  validate_groups(groups, weights.size());
  std::vector<QuantParams> out(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double lo = weights[groups[g].begin];
    double hi = lo;
    for (std::size_t i = groups[g].begin; i < groups[g].end; ++i) {
      const double w = weights[i];
      if (!std::isfinite(w)) {
        throw std::invalid_argument("quant: non-finite weight in group " + std::to_string(g) +
                                    " at index " + std::to_string(i));
      }
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    if (scheme.range_mode == RangeMode::Symmetric) {
      double a = std::max(std::abs(lo), std::abs(hi));
      if (a == 0.0) a = kDegenerateHalfWidth;
      out[g] = QuantParams{-a, a};
    } else {
      if (lo == hi) {
        const double h = std::max(std::abs(lo), kDegenerateHalfWidth);
        out[g] = QuantParams{lo - h, hi + h};
      } else {
        out[g] = QuantParams{lo, hi};
      }
    }
  }
  return out;
}

std::uint8_t encode_one(double w, const QuantParams& p, const QuantScheme& s) {
  const int m_max = max_level(s.precision_m);
  w = std::clamp(w, p.qmin, p.qmax);
  double t;
  if (s.range_mode == RangeMode::Symmetric) {
    t = (w / p.qmax) * m_max;
  } else {
    t = remap(w, p) * m_max;
  }
  const int v = round_level(t, s.rounding, m_max);
  if (s.integer_repr == IntegerRepr::Unsigned) {
    return static_cast<std::uint8_t>(v + m_max);
  }
  return static_cast<std::uint8_t>(static_cast<std::uint8_t>(static_cast<std::int8_t>(v)) &
                                   code_mask(s.precision_m));
}

double decode_one(std::uint8_t code, const QuantParams& p, const QuantScheme& s) {
  const int m_max = max_level(s.precision_m);
  const std::uint8_t masked = code & code_mask(s.precision_m);
  if (s.range_mode == RangeMode::Symmetric) {
    const int v = sign_extend(masked, s.precision_m);
    return (static_cast<double>(v) / m_max) * p.qmax;
  }
  double n;
  if (s.integer_repr == IntegerRepr::Unsigned) {
    n = static_cast<double>(static_cast<int>(masked) - m_max) / m_max;
  } else {
    n = static_cast<double>(sign_extend(masked, s.precision_m)) / m_max;
  }
  return remap_inverse(n, p);
}

QuantizedTensor quantize(std::span<const double> weights,
                         std::span<const GroupRange> groups,
                         std::span<const QuantParams> params,
                         const QuantScheme& scheme) {
  validate_groups(groups, weights.size());
  if (params.size() != groups.size()) {
    throw std::invalid_argument("quant: params/groups size mismatch");
  }
  QuantizedTensor q;
  q.scheme = scheme;
  q.groups.assign(groups.begin(), groups.end());
  q.params.assign(params.begin(), params.end());
  q.codes.assign(weights.size(), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t i = groups[g].begin; i < groups[g].end; ++i) {
      q.codes[i] = encode_one(weights[i], params[g], scheme);
    }
  }
  return q;
}

void dequantize(const QuantizedTensor& q, std::span<double> out) {
  if (out.size() != q.codes.size()) {
    throw std::invalid_argument("quant: output size mismatch in dequantize");
  }
  for (std::size_t g = 0; g < q.groups.size(); ++g) {
    for (std::size_t i = q.groups[g].begin; i < q.groups[g].end; ++i) {
      out[i] = decode_one(q.codes[i], q.params[g], q.scheme);
    }
  }
}

std::vector<double> dequantize(const QuantizedTensor& q) {
  std::vector<double> out(q.codes.size());
  dequantize(q, out);
  return out;
}

void fake_quantize(std::span<const double> weights,
                   std::span<const GroupRange> groups,
                   const QuantScheme& scheme, std::span<double> out) {
  const auto eff = effective_groups(scheme, groups, weights.size());
  const auto params = fit_range(weights, eff, scheme);
  const auto q = quantize(weights, eff, params, scheme);
  dequantize(q, out);
}

std::vector<double> fake_quantize(std::span<const double> weights,
                                  std::span<const GroupRange> groups,
                                  const QuantScheme& scheme) {
  std::vector<double> out(weights.size());
  fake_quantize(weights, groups, scheme, out);
  return out;
}

}  // namespace biterr::quant
