#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "biterr/quantization.hpp"

// Small dense feedforward classifier: fully connected layers with ReLU
// between them and a softmax cross-entropy loss on top. All parameters live
// in one flat double array so quantization, clipping, checkpointing and
// perturbation all operate on plain spans. Forward and backward accept any
// weight view of the right length, so they evaluate master weights,
// fake-quantized weights and bit-error-perturbed weights alike.
//
// Flat layout per layer l: weight matrix (out x in, row-major), then bias.
// Per-layer weights and biases are separate quantization groups.

namespace biterr::net {

struct Architecture {
  std::vector<std::size_t> dims;  // e.g. {784, 256, 128, 10}

  std::size_t layer_count() const { return dims.size() - 1; }
  std::size_t input_dim() const { return dims.front(); }
  std::size_t class_count() const { return dims.back(); }
  std::size_t weight_count() const;

  // Offset of layer l's weight matrix / bias vector in the flat array.
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  // Two groups per layer: weights, then biases.
  std::vector<quant::GroupRange> weight_groups() const;
};

struct Model {
  Architecture arch;
  std::vector<double> weights;  // float master copy

  // Fan-in scaled uniform init (bound sqrt(6 / fan_in)), zero biases.
  static Model init(Architecture arch, std::uint64_t seed);
};

enum class LossKind : std::uint8_t { CrossEntropy = 0, LabelSmoothed = 1 };

struct LossSpec {
  LossKind kind = LossKind::CrossEntropy;
  // Target probability of the true class when smoothing; the rest is spread
  // evenly. Must lie in (1/C, 1]; 1 degenerates to plain cross-entropy.
  double smooth_target = 0.9;
};

// Logits for a batch of n inputs (x is n
// x input_dim row-major; out is n x class_count). Pure in (weights, x).
void forward(const Architecture& arch, std::span<const double> weights,
             std::span<const double> x, std::size_t n, std::span<double> logits_out);

struct BackwardResult {
  double loss = 0.0;             // mean batch loss
  std::vector<double> gradient;  // d loss / d weights, flat
};

// Mean-batch loss and its exact gradient with respect to the supplied weight
// view. Quantization applied to the view upstream is invisible here
// (straight-through): gradients flow as if the view were the parameters.
BackwardResult backward(const Architecture& arch, std::span<const double> weights,
                        std::span<const double> x, std::span<const std::uint8_t> labels,
                        std::size_t n, const LossSpec& loss);

// Mean batch loss only (no gradient).
double loss_only(const Architecture& arch, std::span<const double> weights,
                 std::span<const double> x, std::span<const std::uint8_t> labels,
                 std::size_t n, const LossSpec& loss);

// Element-wise projection onto [-wmax, wmax]; idempotent.
void clip_weights(std::span<double> weights, double wmax);

// Momentum SGD with decoupled-from-nothing classic weight decay: the decay
// term is added to the gradient, then v = momentum*v + g, w -= lr*v.
class SgdMomentum {
 public:
  SgdMomentum(std::size_t weight_count, double momentum, double weight_decay);

  void step(std::span<double> weights, std::span<const double> gradient, double lr);

  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }

 private:
  double momentum_;
  double weight_decay_;
  std::vector<double> velocity_;
};

// Softmax of one logit row (helper shared with the evaluation harness).
void softmax_row(std::span<const double> logits, std::span<double> probs_out);

}  // namespace biterr::net
