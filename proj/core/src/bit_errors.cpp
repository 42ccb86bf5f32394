#include "biterr/bit_errors.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "biterr/rng.hpp"

namespace biterr::faults {

ChipField::ChipField(std::uint64_t chip_seed, std::size_t weight_count, int bits_per_weight)
    : chip_seed_(chip_seed), weight_count_(weight_count), bits_per_weight_(bits_per_weight) {
  if (bits_per_weight < 1 || bits_per_weight > 8) {
    throw std::invalid_argument("faults: bits_per_weight must be in [1, 8]");
  }
}

double ChipField::u(std::size_t i, int j) const {
  return rng::uniform01(chip_seed_, static_cast<std::uint64_t>(i) * bits_per_weight_ + j);
}

std::uint8_t ChipField::flip_mask(std::size_t i, double p) const {
  if (p <= 0.0) return 0;
  std::uint8_t mask = 0;
  for (int j = 0; j < bits_per_weight_; ++j) {
    if (u(i, j) <= p) mask |= static_cast<std::uint8_t>(1u << j);
  }
  return mask;
}

std::vector<ChipField> sample_chips(std::uint64_t master_seed, int count,
                                    std::size_t weight_count, int bits_per_weight) {
  if (count < 1) throw std::invalid_argument("faults: chip count must be >= 1");
  std::vector<ChipField> chips;
  chips.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    chips.emplace_back(rng::at(master_seed, static_cast<std::uint64_t>(c)), weight_count,
                       bits_per_weight);
  }
  return chips;
}

quant::QuantizedTensor inject_random(const quant::QuantizedTensor& codes,
                                     const ChipField& chip, double p,
                                     InjectionReport* report) {
  if (chip.weight_count() != codes.weight_count() ||
      chip.bits_per_weight() != codes.scheme.precision_m) {
    throw std::invalid_argument("faults: chip geometry does not match tensor");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("faults: error rate must be in [0, 1]");
  }
  quant::QuantizedTensor out = codes;
  std::size_t flipped = 0;
  std::size_t affected = 0;
  if (p > 0.0) {
    for (std::size_t i = 0; i < out.codes.size(); ++i) {
      const std::uint8_t mask = chip.flip_mask(i, p);
      if (mask != 0) {
        out.codes[i] ^= mask;
        flipped += static_cast<std::size_t>(std::popcount(mask));
        ++affected;
      }
    }
  }
  if (report) {
    report->flipped_bits = flipped;
    report->affected_weights = affected;
    report->expected_flips =
        p * static_cast<double>(chip.bits_per_weight()) * static_cast<double>(chip.weight_count());
  }
  return out;
}

ProfiledMap load_profiled_map(std::istream& in, const std::string& label) {
  ProfiledMap map;
  map.label = label;
  std::string line;
  auto next_data_line = [&]() -> bool {
    while (std::getline(in, line)) {
      const auto pos = line.find_first_not_of(" \t\r");
      if (pos == std::string::npos || line[pos] == '#') continue;
      return true;
    }
    return false;
  };
  if (!next_data_line()) throw std::runtime_error("profiled map: missing geometry line");
  {
    std::istringstream ls(line);
    if (!(ls >> map.rows >> map.cols) || map.rows == 0 || map.cols == 0) {
      throw std::runtime_error("profiled map: bad geometry line '" + line + "'");
    }
  }
  const std::size_t n = map.cells();
  map.p01.reserve(n);
  map.p10.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!next_data_line()) {
      throw std::runtime_error("profiled map: expected " + std::to_string(n) +
                               " cell lines, got " + std::to_string(k));
    }
    std::istringstream ls(line);
    double a = 0.0, b = 0.0;
    if (!(ls >> a >> b)) {
      throw std::runtime_error("profiled map: bad cell line '" + line + "'");
    }
    if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) {
      throw std::runtime_error("profiled map: probability out of [0, 1] at cell " +
                               std::to_string(k));
    }
    map.p01.push_back(a);
    map.p10.push_back(b);
  }
  return map;
}

ProfiledMap load_profiled_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("profiled map: cannot open " + path);
  return load_profiled_map(in, path);
}

quant::QuantizedTensor inject_profiled(const quant::QuantizedTensor& codes,
                                       const ProfiledMap& map, std::size_t offset,
                                       std::uint64_t sample_seed) {
  const std::size_t n = map.cells();
  if (n == 0) throw std::invalid_argument("faults: profiled map has no cells");
  if (offset >= n) throw std::invalid_argument("faults: offset must be < rows*cols");
  const int m = codes.scheme.precision_m;
  quant::QuantizedTensor out = codes;
  for (std::size_t i = 0; i < out.codes.size(); ++i) {
    std::uint8_t mask = 0;
    for (int j = 0; j < m; ++j) {
      const std::size_t k = (offset + i * static_cast<std::size_t>(m) + j) % n;
      const bool bit = (codes.codes[i] >> j) & 1u;
      const double prob = bit ? map.p10[k] : map.p01[k];
      bool flip;
      if (prob >= 1.0) {
        flip = true;
      } else if (prob <= 0.0) {
        flip = false;
      } else {
        flip = rng::uniform01(sample_seed, k) <= prob;  // one draw per cell
      }
      if (flip) mask |= static_cast<std::uint8_t>(1u << j);
    }
    out.codes[i] ^= mask;
  }
  return out;
}

std::vector<double> inject_linf(std::span<const double> weights,
                                std::span<const quant::GroupRange> groups,
                                double eps_rel, std::uint64_t seed) {
  if (eps_rel < 0.0) throw std::invalid_argument("faults: eps_rel must be >= 0");
  std::vector<double> out(weights.begin(), weights.end());
  for (const auto& g : groups) {
    double lo = weights[g.begin];
    double hi = lo;
    for (std::size_t i = g.begin; i < g.end; ++i) {
      lo = std::min(lo, weights[i]);
      hi = std::max(hi, weights[i]);
    }
    const double bound = eps_rel * (hi - lo);
    for (std::size_t i = g.begin; i < g.end; ++i) {
      out[i] += (2.0 * rng::uniform01(seed, i) - 1.0) * bound;
    }
  }
  return out;
}

}  // namespace biterr::faults
