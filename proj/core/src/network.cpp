#include "biterr/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "biterr/parallel.hpp"
#include "biterr/rng.hpp"

namespace biterr::net {

namespace {

// y[r] = act(x[r] W^T + b) for rows r of a batch, parallel over rows.
// Each output element is one dot product with a fixed summation order, so
// results do not depend on the thread count.
void dense_forward(std::span<const double> x, std::size_t n, std::size_t in,
                   const double* w, const double* b, std::size_t out,
                   bool relu, std::span<double> y) {
  par::parallel_for_chunks(0, n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      const double* xr = x.data() + r * in;
      double* yr = y.data() + r * out;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wo = w + o * in;
        double acc = b[o];
        for (std::size_t k = 0; k < in; ++k) acc += wo[k] * xr[k];
        yr[o] = relu && acc < 0.0 ? 0.0 : acc;
      }
    }
  });
}

void check_loss_spec(const LossSpec& spec, std::size_t classes) {
  if (spec.kind == LossKind::LabelSmoothed) {
    const double floor = 1.0 / static_cast<double>(classes);
    if (!(spec.smooth_target > floor && spec.smooth_target <= 1.0)) {
      throw std::invalid_argument("net: smooth_target must lie in (1/C, 1]");
    }
  }
}

}  // namespace

std::size_t Architecture::weight_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) total += dims[l] * dims[l + 1] + dims[l + 1];
  return total;
}

std::size_t Architecture::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += dims[l] * dims[l + 1] + dims[l + 1];
  return off;
}

std::size_t Architecture::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + dims[layer] * dims[layer + 1];
}

std::vector<quant::GroupRange> Architecture::weight_groups() const {
  std::vector<quant::GroupRange> groups;
  groups.reserve(2 * layer_count());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const std::size_t w0 = weight_offset(l);
    const std::size_t b0 = bias_offset(l);
    groups.push_back({w0, b0});
    groups.push_back({b0, b0 + dims[l + 1]});
  }
  return groups;
}

Model Model::init(Architecture arch, std::uint64_t seed) {
  if (arch.dims.size() < 2) throw std::invalid_argument("net: need at least one layer");
  Model m;
  m.arch = std::move(arch);
  m.weights.assign(m.arch.weight_count(), 0.0);
  rng::Stream stream(seed);
  for (std::size_t l = 0; l < m.arch.layer_count(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.arch.dims[l]));
    double* w = m.weights.data() + m.arch.weight_offset(l);
    const std::size_t count = m.arch.dims[l] * m.arch.dims[l + 1];
    for (std::size_t i = 0; i < count; ++i) w[i] = stream.next_in(-bound, bound);
    // biases stay zero
  }
  return m;
}

void forward(const Architecture& arch, std::span<const double> weights,
             std::span<const double> x, std::size_t n, std::span<double> logits_out) {
  if (weights.size() != arch.weight_count()) {
    throw std::invalid_argument("net: weight view has wrong length");
  }
  if (x.size() != n * arch.input_dim()) {
    throw std::invalid_argument("net: input batch has wrong shape");
  }
  if (logits_out.size() != n * arch.class_count()) {
    throw std::invalid_argument("net: logits buffer has wrong shape");
  }
  const std::size_t layers = arch.layer_count();
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> nxt;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = arch.dims[l];
    const std::size_t out = arch.dims[l + 1];
    const bool relu = l + 1 < layers;
    std::span<double> dst =
        relu ? (nxt.assign(n * out, 0.0), std::span<double>(nxt)) : logits_out;
    dense_forward(cur, n, in, weights.data() + arch.weight_offset(l),
                  weights.data() + arch.bias_offset(l), out, relu, dst);
    if (relu) cur.swap(nxt);
  }
}

void softmax_row(std::span<const double> logits, std::span<double> probs_out) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs_out[k] = std::exp(logits[k] - mx);
    sum += probs_out[k];
  }
  for (auto& p : probs_out) p /= sum;
}

BackwardResult backward(const Architecture& arch, std::span<const double> weights,
                        std::span<const double> x, std::span<const std::uint8_t> labels,
                        std::size_t n, const LossSpec& loss) {
  if (labels.size() != n) throw std::invalid_argument("net: labels/batch size mismatch");
  const std::size_t classes = arch.class_count();
  check_loss_spec(loss, classes);

  const std::size_t layers = arch.layer_count();
  // Post-activation outputs per layer; activations[0] is the input batch.
  std::vector<std::vector<double>> activations(layers + 1);
  activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = arch.dims[l];
    const std::size_t out = arch.dims[l + 1];
    activations[l + 1].assign(n * out, 0.0);
    dense_forward(activations[l], n, in, weights.data() + arch.weight_offset(l),
                  weights.data() + arch.bias_offset(l), out, l + 1 < layers,
                  activations[l + 1]);
  }

  // Loss and dL/dlogits = (softmax - target) / n.
  const std::vector<double>& logits = activations[layers];
  std::vector<double> delta(n * classes);
  double loss_sum = 0.0;
  {
    std::vector<double> probs(classes);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      std::span<const double> row(logits.data() + r * classes, classes);
      softmax_row(row, probs);
      const std::size_t y = labels[r];
      if (y >= classes) throw std::invalid_argument("net: label out of range");
      double q_true = 1.0, q_other = 0.0;
      if (loss.kind == LossKind::LabelSmoothed) {
        q_true = loss.smooth_target;
        q_other = (1.0 - loss.smooth_target) / static_cast<double>(classes - 1);
      }
      for (std::size_t k = 0; k < classes; ++k) {
        const double q = k == y ? q_true : q_other;
        // -sum_k q_k log p_k, computed stably from the logit row
        if (q != 0.0) loss_sum -= q * std::log(std::max(probs[k], 1e-300));
        delta[r * classes + k] = (probs[k] - q) * inv_n;
      }
    }
    loss_sum *= inv_n;
  }

  BackwardResult res;
  res.loss = loss_sum;
  res.gradient.assign(weights.size(), 0.0);

  // Walk layers backwards. delta holds dL/d(pre-activation of layer l+1).
  std::vector<double> delta_prev;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = arch.dims[l];
    const std::size_t out = arch.dims[l + 1];
    const std::vector<double>& a_in = activations[l];
    double* gw = res.gradient.data() + arch.weight_offset(l);
    double* gb = res.gradient.data() + arch.bias_offset(l);

    // dW[o][k] = sum_r delta[r][o] * a_in[r][k]; db[o] = sum_r delta[r][o].
    // Parallel over output rows, fixed r order inside.
    par::parallel_for_chunks(0, out, [&](std::size_t olo, std::size_t ohi) {
      for (std::size_t o = olo; o < ohi; ++o) {
        double* gwo = gw + o * in;
        double gbo = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          const double d = delta[r * out + o];
          gbo += d;
          if (d != 0.0) {
            const double* ar = a_in.data() + r * in;
            for (std::size_t k = 0; k < in; ++k) gwo[k] += d * ar[k];
          }
        }
        gb[o] = gbo;
      }
    });

    if (l == 0) break;
    // delta_prev[r][k] = relu'(a_in[r][k]) * sum_o delta[r][o] * W[o][k]
    const double* w = weights.data() + arch.weight_offset(l);
    delta_prev.assign(n * in, 0.0);
    par::parallel_for_chunks(0, n, [&](std::size_t rlo, std::size_t rhi) {
      for (std::size_t r = rlo; r < rhi; ++r) {
        const double* dr = delta.data() + r * out;
        const double* ar = a_in.data() + r * in;
        double* dp = delta_prev.data() + r * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double d = dr[o];
          if (d == 0.0) continue;
          const double* wo = w + o * in;
          for (std::size_t k = 0; k < in; ++k) dp[k] += d * wo[k];
        }
        for (std::size_t k = 0; k < in; ++k) {
          if (ar[k] <= 0.0) dp[k] = 0.0;  // ReLU gate (a_in is post-ReLU)
        }
      }
    });
    delta.swap(delta_prev);
  }
  return res;
}

double loss_only(const Architecture& arch, std::span<const double> weights,
                 std::span<const double> x, std::span<const std::uint8_t> labels,
                 std::size_t n, const LossSpec& loss) {
  const std::size_t classes = arch.class_count();
  check_loss_spec(loss, classes);
  std::vector<double> logits(n * classes);
  forward(arch, weights, x, n, logits);
  std::vector<double> probs(classes);
  double loss_sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    softmax_row(std::span<const double>(logits.data() + r * classes, classes), probs);
    const std::size_t y = labels[r];
    double q_true = 1.0, q_other = 0.0;
    if (loss.kind == LossKind::LabelSmoothed) {
      q_true = loss.smooth_target;
      q_other = (1.0 - loss.smooth_target) / static_cast<double>(classes - 1);
    }
    for (std::size_t k = 0; k < classes; ++k) {
      const double q = k == y ? q_true : q_other;
      if (q != 0.0) loss_sum -= q * std::log(std::max(probs[k], 1e-300));
    }
  }
  return loss_sum / static_cast<double>(n);
}

void clip_weights(std::span<double> weights, double wmax) {
  if (!(wmax > 0.0)) throw std::invalid_argument("net: wmax must be > 0");
  for (auto& w : weights) w = std::clamp(w, -wmax, wmax);
}

SgdMomentum::SgdMomentum(std::size_t weight_count, double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay), velocity_(weight_count, 0.0) {}

void SgdMomentum::step(std::span<double> weights, std::span<const double> gradient, double lr) {
  if (weights.size() != velocity_.size() || gradient.size() != velocity_.size()) {
    throw std::invalid_argument("net: optimizer size mismatch");
  }
  for (std::size_t i = 0; i < velocity_.size(); ++i) {
    const double g = gradient[i] + weight_decay_ * weights[i];
    velocity_[i] = momentum_ * velocity_[i] + g;
    weights[i] -= lr * velocity_[i];
  }
}

}  // namespace biterr::net
