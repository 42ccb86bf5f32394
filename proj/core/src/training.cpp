#include "biterr/training.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "biterr/rng.hpp"

namespace biterr::train {

namespace {

// Sub-seed derivation: disjoint purposes get disjoint counters.
enum : std::uint64_t { kSeedInit = 1, kSeedShuffle = 2, kSeedChipStream = 3 };

void check_finite(double loss, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw std::runtime_error("train: loss diverged (non-finite) at step " +
                             std::to_string(step));
  }
}

// Shared front half of both step kinds: clip, refit, quantize.
struct QuantizedView {
  std::vector<quant::GroupRange> groups;
  std::vector<quant::QuantParams> params;
  quant::QuantizedTensor codes;
  std::vector<double> wq;
};

QuantizedView prepare_weights(net::Model& model, const TrainConfig& cfg) {
  if (cfg.wmax) net::clip_weights(model.weights, *cfg.wmax);
  QuantizedView v;
  const auto natural = model.arch.weight_groups();
  v.groups = quant::effective_groups(cfg.scheme, natural, model.weights.size());
  v.params = quant::fit_range(model.weights, v.groups, cfg.scheme);
  v.codes = quant::quantize(model.weights, v.groups, v.params, cfg.scheme);
  v.wq = quant::dequantize(v.codes);
  return v;
}

}  // namespace

double lr_for_epoch(const TrainConfig& cfg, int epoch) {
  const int t = cfg.epochs;
  int drops = 0;
  for (int i = 2; i <= 4; ++i) {
    if (epoch >= i * t / 5) ++drops;
  }
  double lr = cfg.lr0;
  for (int d = 0; d < drops; ++d) lr *= 0.1;
  return lr;
}

void InjectionGate::observe(double clean_loss) {
  if (!seen_any_) {
    ema_ = clean_loss;
    seen_any_ = true;
  } else {
    ema_ = decay_ * ema_ + (1.0 - decay_) * clean_loss;
  }
  if (ema_ < threshold_) active_ = true;  // latches permanently
}

StepTrace quant_aware_step(net::Model& model, const Batch& batch, const TrainConfig& cfg,
                           TrainState& state, double lr) {
  const auto v = prepare_weights(model, cfg);
  auto bw = net::backward(model.arch, v.wq, batch.x, batch.labels, batch.size, cfg.loss);
  check_finite(bw.loss, state.step);
  state.optimizer.step(model.weights, bw.gradient, lr);
  state.gate.observe(bw.loss);

  StepTrace t;
  t.step = state.step++;
  t.lr = lr;
  t.clean_loss = bw.loss;
  return t;
}

StepTrace randbet_step(net::Model& model, const Batch& batch, const TrainConfig& cfg,
                       TrainState& state, double lr) {
  if (!cfg.p_train) throw std::invalid_argument("train: randbet_step needs p_train");

  const auto v = prepare_weights(model, cfg);
  auto clean = net::backward(model.arch, v.wq, batch.x, batch.labels, batch.size, cfg.loss);
  check_finite(clean.loss, state.step);
  state.gate.observe(clean.loss);

  StepTrace t;
  t.step = state.step;
  t.lr = lr;
  t.clean_loss = clean.loss;

  if (state.gate.active()) {
    // Fresh random pattern every step: a new chip keyed on the step index.
    const faults::ChipField chip(rng::at(state.chip_stream_seed, state.step),
                                 model.weights.size(), cfg.scheme.precision_m);
    faults::InjectionReport report;
    const auto corrupted = faults::inject_random(v.codes, chip, *cfg.p_train, &report);
    const auto wq_tilde = quant::dequantize(corrupted);
    auto perturbed =
        net::backward(model.arch, wq_tilde, batch.x, batch.labels, batch.size, cfg.loss);
    check_finite(perturbed.loss, state.step);
    for (std::size_t i = 0; i < clean.gradient.size(); ++i) {
      clean.gradient[i] += cfg.lambda * perturbed.gradient[i];
    }
    t.injection_active = true;
    t.perturbed_loss = perturbed.loss;
    t.flipped_bits = report.flipped_bits;
  }

  state.optimizer.step(model.weights, clean.gradient, lr);
  ++state.step;
  return t;
}

TrainResult train(const net::Architecture& arch, const io::Dataset& data,
                  const TrainConfig& cfg) {
  if (data.count == 0) throw std::invalid_argument("train: dataset is empty");
  if (data.dim() != arch.input_dim()) {
    throw std::invalid_argument("train: dataset dimension does not match architecture");
  }

  net::Model model = net::Model::init(arch, rng::at(cfg.master_seed, kSeedInit));
  TrainState state{
      net::SgdMomentum(model.weights.size(), cfg.momentum, cfg.weight_decay),
      InjectionGate(cfg.gate_threshold, cfg.gate_ema_decay),
      rng::at(cfg.master_seed, kSeedChipStream),
      0,
  };

  TrainResult result;
  std::vector<std::size_t> order(data.count);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> bx(cfg.batch_size * arch.input_dim());
  std::vector<std::uint8_t> by(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_for_epoch(cfg, epoch);
    // Fisher-Yates keyed on (shuffle seed, epoch).
    rng::Stream shuffle(rng::at(rng::at(cfg.master_seed, kSeedShuffle),
                                static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = data.count; i > 1; --i) {
      const std::size_t j = shuffle.next_below(i);
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < data.count; start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, data.count - start);
      for (std::size_t b = 0; b < bs; ++b) {
        const std::size_t src = order[start + b];
        std::copy_n(data.pixels.data() + src * data.dim(), data.dim(),
                    bx.data() + b * data.dim());
        by[b] = data.labels[src];
      }
      Batch batch{std::span<const double>(bx.data(), bs * data.dim()),
                  std::span<const std::uint8_t>(by.data(), bs), bs};
      StepTrace t = cfg.p_train ? randbet_step(model, batch, cfg, state, lr)
                                : quant_aware_step(model, batch, cfg, state, lr);
      t.epoch = epoch;
      result.trace.push_back(t);
    }
  }

  // Return the quantized-dequantized weights.
  const auto groups = model.arch.weight_groups();
  const auto wq = quant::fake_quantize(model.weights, groups, cfg.scheme);
  model.weights = wq;
  result.model = std::move(model);
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<StepTrace>& trace) {
  out << "step,epoch,lr,clean_loss,perturbed_loss,injection_active,flipped_bits\n";
  char buf[128];
  for (const auto& t : trace) {
    out << t.step << ',' << t.epoch << ',';
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,", t.lr, t.clean_loss);
    out << buf;
    if (t.perturbed_loss) {
      std::snprintf(buf, sizeof(buf), "%.6g", *t.perturbed_loss);
      out << buf;
    } else {
      out << "none";
    }
    out << ',' << (t.injection_active ? 1 : 0) << ',' << t.flipped_bits << '\n';
  }
}

}  // namespace biterr::train
