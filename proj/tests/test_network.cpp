#include <doctest.h>

#include <cmath>
#include <vector>

#include "biterr/network.hpp"
#include "biterr/parallel.hpp"
#include "biterr/rng.hpp"

using namespace biterr;

namespace {

// Central differences are only a valid oracle away from the ReLU kinks: a
// +-h weight probe must not flip any unit's activation sign. Returns the
// first seed whose init keeps every pre-activation at a safe margin.
std::uint64_t kink_free_seed(const net::Architecture& arch, const std::vector<double>& x,
                             std::size_t n, double h, std::uint64_t start) {
  for (std::uint64_t seed = start;; ++seed) {
    const auto model = net::Model::init(arch, seed);
    bool safe = true;
    std::vector<double> cur(x);
    for (std::size_t l = 0; l + 1 < arch.layer_count() && safe; ++l) {
      const std::size_t in = arch.dims[l];
      const std::size_t out = arch.dims[l + 1];
      double max_in = 1.0;
      for (double v : cur) max_in = std::max(max_in, std::abs(v));
      std::vector<double> nxt(n * out, 0.0);
      const double* w = model.weights.data() + arch.weight_offset(l);
      const double* b = model.weights.data() + arch.bias_offset(l);
      for (std::size_t r = 0; r < n && safe; ++r) {
        for (std::size_t o = 0; o < out; ++o) {
          double z = b[o];
          for (std::size_t k = 0; k < in; ++k) z += w[o * in + k] * cur[r * in + k];
          if (std::abs(z) < 5.0 * h * max_in) safe = false;
          nxt[r * out + o] = z > 0.0 ? z : 0.0;
        }
      }
      cur.swap(nxt);
    }
    if (safe) return seed;
  }
}

// Central finite differences against the analytic gradient; returns the
// normwise relative error.
double gradcheck(const net::Architecture& arch, std::vector<double> weights,
                 const std::vector<double>& x, const std::vector<std::uint8_t>& y,
                 std::size_t n, const net::LossSpec& loss, double h) {
  const auto bw = net::backward(arch, weights, x, y, n, loss);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double keep = weights[i];
    weights[i] = keep + h;
    const double up = net::loss_only(arch, weights, x, y, n, loss);
    weights[i] = keep - h;
    const double down = net::loss_only(arch, weights, x, y, n, loss);
    weights[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    num += (bw.gradient[i] - fd) * (bw.gradient[i] - fd);
    den += fd * fd;
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("architecture layout: offsets and groups") {
  const net::Architecture arch{{4, 3, 2}};
  CHECK(arch.weight_count() == 4 * 3 + 3 + 3 * 2 + 2);
  CHECK(arch.weight_offset(0) == 0);
  CHECK(arch.bias_offset(0) == 12);
  CHECK(arch.weight_offset(1) == 15);
  CHECK(arch.bias_offset(1) == 21);
  const auto groups = arch.weight_groups();
  REQUIRE(groups.size() == 4);
  CHECK(groups[0] == quant::GroupRange{0, 12});
  CHECK(groups[1] == quant::GroupRange{12, 15});
  CHECK(groups[2] == quant::GroupRange{15, 21});
  CHECK(groups[3] == quant::GroupRange{21, 23});
}

TEST_CASE("forward: identity single layer reproduces its input") {
  const net::Architecture arch{{3, 3}};
  std::vector<double> w(arch.weight_count(), 0.0);
  w[0] = w[4] = w[8] = 1.0;  // identity matrix, zero bias
  const std::vector<double> x{0.3, -1.2, 0.44};
  std::vector<double> logits(3);
  net::forward(arch, w, x, 1, logits);
  CHECK(logits[0] == doctest::Approx(0.3));
  CHECK(logits[1] == doctest::Approx(-1.2));
  CHECK(logits[2] == doctest::Approx(0.44));
}

TEST_CASE("all-zero weights: uniform softmax, loss = ln C") {
  const net::Architecture arch{{8, 6, 10}};
  std::vector<double> w(arch.weight_count(), 0.0);
  const std::size_t n = 5;
  std::vector<double> x(n * 8, 0.7);
  std::vector<std::uint8_t> y{0, 3, 9, 1, 5};
  const double loss = net::loss_only(arch, w, x, y, n, {});
  CHECK(loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("forward twice gives bit-identical logits") {
  const net::Architecture arch{{16, 12, 4}};
  const auto model = net::Model::init(arch, 5);
  std::vector<double> x(3 * 16);
  rng::Stream s(6);
  for (auto& v : x) v = s.next_unit();
  std::vector<double> a(3 * 4), b(3 * 4);
  net::forward(arch, model.weights, x, 3, a);
  net::forward(arch, model.weights, x, 3, b);
  CHECK(a == b);
}

TEST_CASE("forward is identical across thread counts") {
  const net::Architecture arch{{32, 24, 8}};
  const auto model = net::Model::init(arch, 15);
  std::vector<double> x(64 * 32);
  rng::Stream s(16);
  for (auto& v : x) v = s.next_unit();
  std::vector<double> a(64 * 8), b(64 * 8);
  par::set_max_threads(1);
  net::forward(arch, model.weights, x, 64, a);
  par::set_max_threads(2);
  net::forward(arch, model.weights, x, 64, b);
  par::set_max_threads(0);
  CHECK(a == b);
}

TEST_CASE("gradient matches central finite differences, both loss kinds") {
  // 2-layer net, ~1000 weights, step 1e-3, double precision.
  const net::Architecture arch{{24, 32, 10}};
  const std::size_t n = 8;
  std::vector<double> x(n * 24);
  std::vector<std::uint8_t> y(n);
  rng::Stream s(12);
  for (auto& v : x) v = s.next_unit();
  for (auto& v : y) v = static_cast<std::uint8_t>(s.next_below(10));

  const double h = 1e-3;
  const auto model = net::Model::init(arch, kink_free_seed(arch, x, n, h, 11));
  REQUIRE(model.weights.size() > 1000);

  const double rel_ce = gradcheck(arch, model.weights, x, y, n,
                                  {net::LossKind::CrossEntropy, 0.9}, h);
  CHECK(rel_ce <= 1e-4);
  const double rel_ls = gradcheck(arch, model.weights, x, y, n,
                                  {net::LossKind::LabelSmoothed, 0.9}, h);
  CHECK(rel_ls <= 1e-4);
}

TEST_CASE("label smoothing at target 1 equals plain cross-entropy") {
  const net::Architecture arch{{10, 8, 4}};
  const auto model = net::Model::init(arch, 21);
  const std::size_t n = 6;
  std::vector<double> x(n * 10);
  std::vector<std::uint8_t> y(n);
  rng::Stream s(22);
  for (auto& v : x) v = s.next_unit();
  for (auto& v : y) v = static_cast<std::uint8_t>(s.next_below(4));
  const auto ce = net::backward(arch, model.weights, x, y, n, {net::LossKind::CrossEntropy, 0.9});
  const auto ls = net::backward(arch, model.weights, x, y, n, {net::LossKind::LabelSmoothed, 1.0});
  CHECK(ce.loss == doctest::Approx(ls.loss).epsilon(1e-12));
  for (std::size_t i = 0; i < ce.gradient.size(); ++i) {
    CHECK(ce.gradient[i] == doctest::Approx(ls.gradient[i]).epsilon(1e-12));
  }
}

TEST_CASE("label smoothing target must exceed 1/C") {
  const net::Architecture arch{{4, 4}};
  std::vector<double> w(arch.weight_count(), 0.0);
  std::vector<double> x(4, 0.0);
  std::vector<std::uint8_t> y{0};
  CHECK_THROWS(net::loss_only(arch, w, x, y, 1, {net::LossKind::LabelSmoothed, 0.2}));
}

TEST_CASE("near-zero gradient at a saturated optimum") {
  // One layer on a linearly separable pair, weights scaled until softmax
  // saturates; the gradient should be ~0.
  const net::Architecture arch{{2, 2}};
  std::vector<double> w(arch.weight_count(), 0.0);
  w[0] = 50.0;  // class 0 looks at x0
  w[3] = 50.0;  // class 1 looks at x1
  const std::vector<double> x{1.0, 0.0, 0.0, 1.0};
  const std::vector<std::uint8_t> y{0, 1};
  const auto bw = net::backward(arch, w, x, y, 2, {});
  CHECK(bw.loss < 1e-12);
  for (double g : bw.gradient) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("clip_weights: projection examples and idempotence") {
  std::vector<double> w{0.5, -0.05, -3.0, 0.1};
  net::clip_weights(w, 0.1);
  CHECK(w == std::vector<double>{0.1, -0.05, -0.1, 0.1});
  auto again = w;
  net::clip_weights(again, 0.1);
  CHECK(again == w);
  CHECK_THROWS(net::clip_weights(w, 0.0));
}

TEST_CASE("sgd with momentum: closed-form two-step displacement") {
  // Constant gradient g, momentum 0.9, no decay: after two steps the weight
  // moved by lr*g*(1 + 1.9).
  std::vector<double> w{1.0};
  const std::vector<double> g{2.0};
  net::SgdMomentum opt(1, 0.9, 0.0);
  const double lr = 0.1;
  opt.step(w, g, lr);
  opt.step(w, g, lr);
  CHECK(w[0] == doctest::Approx(1.0 - lr * 2.0 * (1.0 + 1.9)).epsilon(1e-12));
}

TEST_CASE("sgd: zero momentum and decay is a plain gradient step") {
  std::vector<double> w{0.5, -0.5};
  const std::vector<double> g{1.0, -2.0};
  net::SgdMomentum opt(2, 0.0, 0.0);
  opt.step(w, g, 0.25);
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[1] == doctest::Approx(0.0));
}

TEST_CASE("sgd: zero learning rate leaves the model unchanged") {
  std::vector<double> w{0.5, -0.5};
  const auto before = w;
  net::SgdMomentum opt(2, 0.9, 5e-4);
  opt.step(w, std::vector<double>{1.0, 1.0}, 0.0);
  CHECK(w == before);
}

TEST_CASE("training smoke: separable toy set reaches low loss quickly") {
  // Two Gaussian-ish blobs in 8 dimensions, one dense layer stack.
  const net::Architecture arch{{8, 16, 2}};
  auto model = net::Model::init(arch, 33);
  const std::size_t n = 64;
  std::vector<double> x(n * 8);
  std::vector<std::uint8_t> y(n);
  rng::Stream s(34);
  for (std::size_t r = 0; r < n; ++r) {
    y[r] = static_cast<std::uint8_t>(r % 2);
    const double center = y[r] == 0 ? 0.25 : 0.75;
    for (std::size_t k = 0; k < 8; ++k) x[r * 8 + k] = center + 0.05 * (s.next_unit() - 0.5);
  }
  net::SgdMomentum opt(model.weights.size(), 0.9, 0.0);
  double loss = 0.0;
  for (int step = 0; step < 500; ++step) {
    const auto bw = net::backward(arch, model.weights, x, y, n, {});
    loss = bw.loss;
    if (loss <= 0.05) break;
    opt.step(model.weights, bw.gradient, 0.5);
  }
  CHECK(loss <= 0.05);
}

}  // TEST_SUITE
