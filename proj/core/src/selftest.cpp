#include "biterr/selftest.hpp"

#include <cmath>
#include <ostream>
#include <vector>

#include "biterr/bit_errors.hpp"
#include "biterr/evaluation.hpp"
#include "biterr/network.hpp"
#include "biterr/quantization.hpp"
#include "biterr/rng.hpp"

namespace biterr::selftest {

namespace {

using quant::GroupRange;
using quant::QuantScheme;

bool check(std::ostream& out, const char* name, bool ok) {
  out << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
  return ok;
}

// All scheme axis combinations that construct.
std::vector<QuantScheme> all_schemes(int m) {
  std::vector<QuantScheme> v;
  for (int range = 0; range < 2; ++range) {
    for (int repr = 0; repr < 2; ++repr) {
      for (int rnd = 0; rnd < 2; ++rnd) {
        if (repr == 1 && range == 0) continue;  // unsigned requires asymmetric
        v.push_back(QuantScheme::make(m, quant::Granularity::PerGroup,
                                      static_cast<quant::RangeMode>(range),
                                      static_cast<quant::IntegerRepr>(repr),
                                      static_cast<quant::Rounding>(rnd)));
      }
    }
  }
  return v;
}

bool quant_roundtrip_and_masking(std::ostream& out) {
  bool ok = true;
  for (int m : {2, 3, 4, 8}) {
    for (const auto& scheme : all_schemes(m)) {
      const std::size_t n = 20000;
      std::vector<double> w(n);
      rng::Stream s(0xDECAF + m);
      for (auto& x : w) x = s.next_in(-0.75, 0.5);
      const GroupRange group{0, n};
      const auto params = quant::fit_range(w, std::span(&group, 1), scheme);
      const auto q = quant::quantize(w, std::span(&group, 1), params, scheme);
      const auto back = quant::dequantize(q);
      const double step = params[0].step_weight_units(scheme);
      const double bound =
          scheme.rounding == quant::Rounding::RoundNearest ? step * 0.5 : step;
      for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(back[i] - w[i]) > bound * (1.0 + 1e-9)) ok = false;
        if (q.codes[i] & ~quant::code_mask(m)) ok = false;
      }
      // Total decode over all 2^m code words.
      for (int c = 0; c < (1 << m); ++c) {
        quant::QuantizedTensor one;
        one.scheme = scheme;
        one.groups = {GroupRange{0, 1}};
        one.params = {params[0]};
        one.codes = {static_cast<std::uint8_t>(c)};
        const auto d = quant::dequantize(one);
        if (!std::isfinite(d[0])) ok = false;
      }
    }
  }
  return check(out, "quantization round-trip, masking, total decode", ok);
}

bool chip_persistence_and_involution(std::ostream& out) {
  bool ok = true;
  const std::size_t n = 5000;
  std::vector<double> w(n);
  rng::Stream s(0xFEED);
  for (auto& x : w) x = s.next_in(-1.0, 1.0);
  const GroupRange group{0, n};
  const auto scheme = QuantScheme::rquant(8);
  const auto params = quant::fit_range(w, std::span(&group, 1), scheme);
  const auto q = quant::quantize(w, std::span(&group, 1), params, scheme);
  const faults::ChipField chip(42, n, 8);
  const auto hi = faults::inject_random(q, chip, 0.05);
  const auto lo = faults::inject_random(q, chip, 0.01);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t m_hi = hi.codes[i] ^ q.codes[i];
    const std::uint8_t m_lo = lo.codes[i] ^ q.codes[i];
    if (m_lo & ~m_hi) ok = false;  // subset property
  }
  const auto twice = faults::inject_random(hi, chip, 0.05);
  for (std::size_t i = 0; i < n; ++i) {
    if (twice.codes[i] != q.codes[i]) ok = false;  // XOR involution
  }
  return check(out, "bit error persistence and involution", ok);
}

bool gradient_check(std::ostream& out) {
  const net::Architecture arch{{12, 8, 4}};
  net::Model model = net::Model::init(arch, 99);
  const std::size_t n = 6;
  std::vector<double> x(n * 12);
  std::vector<std::uint8_t> y(n);
  rng::Stream s(7);
  for (auto& v : x) v = s.next_unit();
  for (auto& v : y) v = static_cast<std::uint8_t>(s.next_below(4));
  const net::LossSpec loss{net::LossKind::CrossEntropy, 0.9};
  const auto bw = net::backward(arch, model.weights, x, y, n, loss);
  double num = 0.0, den = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    const double keep = model.weights[i];
    model.weights[i] = keep + h;
    const double up = net::loss_only(arch, model.weights, x, y, n, loss);
    model.weights[i] = keep - h;
    const double dn = net::loss_only(arch, model.weights, x, y, n, loss);
    model.weights[i] = keep;
    const double fd = (up - dn) / (2 * h);
    num += (bw.gradient[i] - fd) * (bw.gradient[i] - fd);
    den += fd * fd;
  }
  const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
  return check(out, "analytic gradient vs finite differences", rel < 1e-6);
}

bool bound_values(std::ostream& out) {
  const double a = eval::prop1_bound(10000, 1000000, 0.01);
  const double b = eval::prop1_bound(100000, 1000000, 0.01);
  return check(out, "generalization bound reference values",
               std::abs(a - 0.041) < 1e-3 && std::abs(b - 0.017) < 1e-3);
}

bool rng_golden(std::ostream& out) {
  // Pinned outputs of the keyed generator; these must never change.
  const bool ok = rng::at(0, 0) == 0xE220A8397B1DCDAFull &&
                  rng::at(0x123456789ABCDEF0ull, 7) == 0x53E01F580916C5CBull &&
                  rng::at(42, 12345) == 0xBE5663AA0035CBD7ull;
  return check(out, "counter rng golden values", ok);
}

}  // namespace

bool run(std::ostream& out) {
  bool ok = true;
  ok &= quant_roundtrip_and_masking(out);
  ok &= chip_persistence_and_involution(out);
  ok &= gradient_check(out);
  ok &= bound_values(out);
  ok &= rng_golden(out);
  out << (ok ? "selftest: all checks passed\n" : "selftest: FAILURES\n");
  return ok;
}

}  // namespace biterr::selftest
