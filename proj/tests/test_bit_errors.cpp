#include <doctest.h>

#include <bit>
#include <cmath>
#include <sstream>

#include "biterr/bit_errors.hpp"
#include "biterr/rng.hpp"

using namespace biterr;
using quant::GroupRange;

namespace {

quant::QuantizedTensor random_tensor(std::size_t n, int m, std::uint64_t seed) {
  std::vector<double> w(n);
  rng::Stream s(seed);
  for (auto& x : w) x = s.next_in(-1.0, 1.0);
  const GroupRange g{0, n};
  const auto scheme = quant::QuantScheme::rquant(m);
  const auto params = quant::fit_range(w, std::span(&g, 1), scheme);
  return quant::quantize(w, std::span(&g, 1), params, scheme);
}

faults::ProfiledMap zero_map(std::size_t rows, std::size_t cols) {
  faults::ProfiledMap m;
  m.rows = rows;
  m.cols = cols;
  m.p01.assign(rows * cols, 0.0);
  m.p10.assign(rows * cols, 0.0);
  return m;
}

}  // namespace

TEST_SUITE("faults") {

TEST_CASE("u(i,j) is frozen: golden values match an independent evaluation") {
  // Values computed externally from the documented construction
  // (SplitMix64 finalizer over seed + (counter + 1) * golden ratio).
  CHECK(rng::at(0, 0) == 0xE220A8397B1DCDAFull);
  CHECK(rng::at(0x123456789ABCDEF0ull, 7) == 0x53E01F580916C5CBull);

  const faults::ChipField chip(0x5EED, 200000, 8);
  CHECK(chip.u(0, 0) == doctest::Approx(0.038848734697185194).epsilon(1e-15));
  CHECK(chip.u(0, 7) == doctest::Approx(0.07241288386808664).epsilon(1e-15));
  CHECK(chip.u(12345, 3) == doctest::Approx(0.1075416559888065).epsilon(1e-15));

  const faults::ChipField other(0xABCDEF, 100000, 8);
  CHECK(other.u(99999, 7) == doctest::Approx(0.5095273201087315).epsilon(1e-15));
}

TEST_CASE("p = 0 injection is the identity") {
  const auto q = random_tensor(4096, 8, 1);
  const faults::ChipField chip(9, 4096, 8);
  faults::InjectionReport report;
  const auto out = faults::inject_random(q, chip, 0.0, &report);
  CHECK(out.codes == q.codes);
  CHECK(report.flipped_bits == 0);
  CHECK(report.affected_weights == 0);
}

TEST_CASE("p = 1 flips every stored bit") {
  const auto q = random_tensor(1024, 8, 2);
  const faults::ChipField chip(11, 1024, 8);
  const auto out = faults::inject_random(q, chip, 1.0);
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    CHECK(out.codes[i] == static_cast<std::uint8_t>(q.codes[i] ^ 0xFF));
  }
}

TEST_CASE("MSB flip semantics: 127 becomes 255 unsigned, -1 signed") {
  // Unsigned code 0111 1111 with the most significant bit flipped.
  CHECK((127 ^ 0x80) == 255);
  const auto uns = quant::QuantScheme::rquant(8);
  const quant::QuantParams p{-1.0, 1.0};
  const double before = quant::decode_one(127, p, uns);
  const double after = quant::decode_one(127 ^ 0x80, p, uns);
  CHECK(before == doctest::Approx(0.0));
  CHECK(after == doctest::Approx(128.0 / 127.0));

  // Signed two's complement: code 127 with MSB flipped reads -1.
  const auto sym = quant::QuantScheme::normal(8);
  const quant::QuantParams ps{-1.0, 1.0};
  CHECK(quant::decode_one(127, ps, sym) == doctest::Approx(1.0));
  CHECK(quant::decode_one(127 ^ 0x80, ps, sym) == doctest::Approx(-1.0 / 127.0));
}

TEST_CASE("expected flips match p*m*W, observed within 4 sigma") {
  // W and the expectation follow the reference workload: W = 5,498,378
  // weights at m = 8, p = 1% give 439,870.24 expected bit errors.
  const std::size_t w_count = 5498378;
  const int m = 8;
  const double p = 0.01;
  quant::QuantizedTensor q;
  q.scheme = quant::QuantScheme::rquant(8);
  q.groups = {GroupRange{0, w_count}};
  q.params = {quant::QuantParams{-1.0, 1.0}};
  q.codes.assign(w_count, 0x55);
  const faults::ChipField chip(0xC41B, w_count, m);
  faults::InjectionReport report;
  const auto out = faults::inject_random(q, chip, p, &report);
  (void)out;
  CHECK(report.expected_flips == doctest::Approx(439870.24));
  const double sigma = std::sqrt(p * (1 - p) * m * static_cast<double>(w_count));
  CHECK(std::abs(static_cast<double>(report.flipped_bits) - report.expected_flips) <=
        4.0 * sigma);
}

TEST_CASE("persistence: error sets at lower rates are subsets") {
  const auto q = random_tensor(100000, 8, 3);
  for (std::uint64_t c = 0; c < 4; ++c) {
    const faults::ChipField chip(rng::at(77, c), q.weight_count(), 8);
    const auto base = faults::inject_random(q, chip, 0.025);
    for (double p : {0.001, 0.005, 0.01}) {
      const auto low = faults::inject_random(q, chip, p);
      for (std::size_t i = 0; i < q.codes.size(); ++i) {
        const std::uint8_t mask_low = low.codes[i] ^ q.codes[i];
        const std::uint8_t mask_high = base.codes[i] ^ q.codes[i];
        CHECK((mask_low & ~mask_high) == 0);
      }
    }
  }
}

TEST_CASE("involution: injecting the same chip twice restores the input") {
  const auto q = random_tensor(50000, 8, 4);
  const faults::ChipField chip(123, q.weight_count(), 8);
  const auto once = faults::inject_random(q, chip, 0.03);
  const auto twice = faults::inject_random(once, chip, 0.03);
  CHECK(twice.codes == q.codes);
}

TEST_CASE("bit errors only touch the m stored bits") {
  const auto q = random_tensor(10000, 4, 5);
  const faults::ChipField chip(321, q.weight_count(), 4);
  const auto out = faults::inject_random(q, chip, 0.5);
  for (const auto code : out.codes) {
    CHECK((code & ~quant::code_mask(4)) == 0);
  }
}

TEST_CASE("geometry mismatch is rejected") {
  const auto q = random_tensor(100, 8, 6);
  CHECK_THROWS(faults::inject_random(q, faults::ChipField(1, 99, 8), 0.1));
  CHECK_THROWS(faults::inject_random(q, faults::ChipField(1, 100, 4), 0.1));
  CHECK_THROWS(faults::inject_random(q, faults::ChipField(1, 100, 8), 1.5));
}

TEST_CASE("sample_chips: deterministic, independent across indices") {
  const auto a = faults::sample_chips(2024, 50, 1000, 8);
  const auto b = faults::sample_chips(2024, 50, 1000, 8);
  REQUIRE(a.size() == 50);
  for (int c = 0; c < 50; ++c) CHECK(a[c].seed() == b[c].seed());

  // Two distinct chips agree on a flipped bit with probability ~p^2.
  const double p = 0.1;
  const std::size_t w_count = 100000;
  const faults::ChipField c0(rng::at(99, 0), w_count, 8);
  const faults::ChipField c1(rng::at(99, 1), w_count, 8);
  std::size_t both = 0;
  const std::size_t bits = w_count * 8;
  for (std::size_t i = 0; i < w_count; ++i) {
    both += static_cast<std::size_t>(
        std::popcount(static_cast<unsigned>(c0.flip_mask(i, p) & c1.flip_mask(i, p))));
  }
  const double frac = static_cast<double>(both) / static_cast<double>(bits);
  const double sigma = std::sqrt(p * p * (1 - p * p) / static_cast<double>(bits));
  CHECK(std::abs(frac - p * p) <= 5.0 * sigma);
}

TEST_CASE("profiled map parsing: comments, geometry, bad probabilities") {
  std::istringstream good("# fixture\n2 2\n0 0\n0.5 0.25\n1 0\n# tail comment\n0 1\n");
  const auto map = faults::load_profiled_map(good, "fixture");
  CHECK(map.rows == 2);
  CHECK(map.cols == 2);
  CHECK(map.p01[1] == doctest::Approx(0.5));
  CHECK(map.p10[3] == doctest::Approx(1.0));

  std::istringstream nan_prob("1 1\nnan 0\n");
  CHECK_THROWS(faults::load_profiled_map(nan_prob));
  std::istringstream oob("1 1\n1.5 0\n");
  CHECK_THROWS(faults::load_profiled_map(oob));
  std::istringstream truncated("2 2\n0 0\n");
  CHECK_THROWS(faults::load_profiled_map(truncated));
}

TEST_CASE("profiled injection: zero map is the identity") {
  const auto q = random_tensor(1000, 8, 7);
  const auto map = zero_map(16, 16);
  const auto out = faults::inject_profiled(q, map, 0, 42);
  CHECK(out.codes == q.codes);
}

TEST_CASE("profiled injection: deterministic cell flips exactly its bit") {
  // p01 = 1 at cell 0, everything else 0; weight 0 bit 0 holds a 0.
  auto map = zero_map(4, 4);
  map.p01[0] = 1.0;
  quant::QuantizedTensor q = random_tensor(8, 8, 8);
  q.codes[0] &= static_cast<std::uint8_t>(~1u);  // clear bit 0
  const auto out = faults::inject_profiled(q, map, 0, 1);
  CHECK((out.codes[0] & 1u) == 1u);
  for (std::size_t i = 1; i < q.codes.size(); ++i) {
    // Other weights wrap onto cells with probability zero except cell 0,
    // which they hit with a stored bit of either value; p10 = 0 keeps ones.
    const std::uint8_t diff = out.codes[i] ^ q.codes[i];
    for (int j = 0; j < 8; ++j) {
      if ((diff >> j) & 1u) {
        const std::size_t cell = (i * 8 + j) % 16;
        CHECK(cell == 0);
        CHECK(((q.codes[i] >> j) & 1u) == 0);
      }
    }
  }
}

TEST_CASE("profiled injection: same (map, offset, seed) is bit-identical") {
  auto map = zero_map(8, 8);
  rng::Stream s(0xBEEF);
  for (auto& v : map.p01) v = s.next_unit() * 0.5;
  for (auto& v : map.p10) v = s.next_unit() * 0.5;
  const auto q = random_tensor(500, 8, 9);
  const auto a = faults::inject_profiled(q, map, 5, 77);
  const auto b = faults::inject_profiled(q, map, 5, 77);
  CHECK(a.codes == b.codes);
  const auto c = faults::inject_profiled(q, map, 6, 77);
  CHECK(a.codes != c.codes);
}

TEST_CASE("profiled injection: offset must be inside the array") {
  const auto q = random_tensor(10, 8, 10);
  const auto map = zero_map(2, 2);
  CHECK_THROWS(faults::inject_profiled(q, map, 4, 1));
  CHECK_NOTHROW(faults::inject_profiled(q, map, 3, 1));  // wrap-around is fine
}

TEST_CASE("linf noise: identity at zero, bounded by eps*range, deterministic") {
  std::vector<double> w(1000);
  rng::Stream s(0x11F);
  for (auto& x : w) x = s.next_in(-0.2, 0.6);
  const std::vector<GroupRange> groups{{0, 500}, {500, 1000}};

  const auto same = faults::inject_linf(w, groups, 0.0, 5);
  CHECK(same == w);

  const double eps = 0.03;
  const auto noisy = faults::inject_linf(w, groups, eps, 5);
  const auto again = faults::inject_linf(w, groups, eps, 5);
  CHECK(noisy == again);
  for (const auto& g : groups) {
    double lo = w[g.begin], hi = w[g.begin];
    for (std::size_t i = g.begin; i < g.end; ++i) {
      lo = std::min(lo, w[i]);
      hi = std::max(hi, w[i]);
    }
    const double bound = eps * (hi - lo);
    for (std::size_t i = g.begin; i < g.end; ++i) {
      CHECK(std::abs(noisy[i] - w[i]) <= bound);
    }
  }
}

}  // TEST_SUITE
