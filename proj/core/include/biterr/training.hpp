#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "biterr/bit_errors.hpp"
#include "biterr/dataset.hpp"
#include "biterr/network.hpp"
#include "biterr/quantization.hpp"

// Training loops: quantization-aware training (with optional weight
// clipping) and random bit error training. Every step clips the float
// master weights, refits the quantization ranges, fakes quantization for the
// forward/backward passes and applies the update to the float weights
// (straight-through). Random bit error training additionally corrupts the
// quantized codes with a fresh chip pattern each step and combines the clean
// and perturbed gradients.

namespace biterr::train {

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 128;
  double lr0 = 0.05;  // multiplied by 0.1 after 2/5, 3/5 and 4/5 of the epochs
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::optional<double> wmax;     // weight clipping bound
  std::optional<double> p_train;  // bit error rate during training
  double lambda = 1.0;            // weight of the perturbed gradient
  double gate_threshold = 1.75;   // injection starts once smoothed clean loss dips below
  double gate_ema_decay = 0.95;
  quant::QuantScheme scheme;
  net::LossSpec loss;
  std::uint64_t master_seed = 1;
};

double lr_for_epoch(const TrainConfig& cfg, int epoch);

struct StepTrace {
  std::size_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  double clean_loss = 0.0;
  std::optional<double> perturbed_loss;  // present iff injection was active
  bool injection_active = false;
  std::size_t flipped_bits = 0;
};

// Latches on permanently the first time the exponentially smoothed clean
// loss drops below the threshold.
class InjectionGate {
 public:
  InjectionGate(double threshold, double ema_decay)
      : threshold_(threshold), decay_(ema_decay) {}

  void observe(double clean_loss);
  bool active() const { return active_; }
  double smoothed_loss() const { return ema_; }

 private:
  double threshold_;
  double decay_;
  double ema_ = 0.0;
  bool seen_any_ = false;
  bool active_ = false;
};

// One mini-batch. x is batch_size x input_dim.
struct Batch {
  std::span<const double> x;
  std::span<const std::uint8_t> labels;
  std::size_t size = 0;
};

// Mutable per-run state shared by the step functions.
struct TrainState {
  net::SgdMomentum optimizer;
  InjectionGate gate;
  std::uint64_t chip_stream_seed = 0;  // per-step training chips derive from this
  std::size_t step = 0;
};

// Clip -> refit -> fake-quantize -> forward/backward -> float update.
StepTrace quant_aware_step(net::Model& model, const Batch& batch, const TrainConfig& cfg,
                           TrainState& state, double lr);

// The random bit error step: behaves exactly like quant_aware_step until the
// gate latches; afterwards adds a perturbed pass through codes corrupted at
// p_train by a fresh chip and updates with grad_clean + lambda*grad_perturbed.
StepTrace randbet_step(net::Model& model, const Batch& batch, const TrainConfig& cfg,
                       TrainState& state, double lr);

struct TrainResult {
  net::Model model;  // final weights are quantized-dequantized
  std::vector<StepTrace> trace;
};

// Full run over shuffled mini-batches; deterministic in (cfg, data).
TrainResult train(const net::Architecture& arch, const io::Dataset& data,
                  const TrainConfig& cfg);

// Trace CSV: step,epoch,lr,clean_loss,perturbed_loss,injection_active,flipped_bits.
void write_trace_csv(std::ostream& out, const std::vector<StepTrace>& trace);

}  // namespace biterr::train
