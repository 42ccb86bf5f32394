// biterr: train, evaluate, and perturb bit-error-robust quantized networks.
//
// Subcommands:
//   train     quantization-aware / clipped / random-bit-error training
//   eval      TE and RTE sweeps over a fixed chip panel, profiled-map replay
//   inject    one-shot bit error injection into a checkpoint
//   bound     generalization bound on the empirical robust test error
//   selftest  run the built-in invariant suites
//
// The BITERR_THREADS environment variable caps evaluation parallelism.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "biterr/bit_errors.hpp"
#include "biterr/checkpoint.hpp"
#include "biterr/evaluation.hpp"
#include "biterr/experiment_config.hpp"
#include "biterr/rng.hpp"
#include "biterr/selftest.hpp"
#include "biterr/training.hpp"

namespace fs = std::filesystem;
using namespace biterr;

namespace {

io::Dataset load_split(const std::string& images, const std::string& labels,
                       std::size_t limit, const char* what) {
  if (images.empty() || labels.empty()) {
    throw std::runtime_error(std::string("config: missing ") + what + " dataset paths");
  }
  io::Dataset ds = io::load_idx(images, labels);
  if (limit > 0) ds = ds.subset(limit);
  return ds;
}

quant::QuantizedTensor quantize_weights(const net::Architecture& arch,
                                        std::span<const double> weights,
                                        const quant::QuantScheme& scheme) {
  const auto natural = arch.weight_groups();
  const auto groups = quant::effective_groups(scheme, natural, weights.size());
  const auto params = quant::fit_range(weights, groups, scheme);
  return quant::quantize(weights, groups, params, scheme);
}

std::vector<std::size_t> parse_offsets(const std::string& csv) {
  std::vector<std::size_t> offsets;
  std::string part;
  std::istringstream ss(csv);
  while (std::getline(ss, part, ',')) offsets.push_back(std::stoull(part));
  return offsets;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = io::parse_config_file(config_path);
  const auto data = load_split(cfg.train_images, cfg.train_labels, cfg.train_limit, "train");
  std::printf("training %s: %zu examples, scheme %s, epochs %d\n", cfg.model_name.c_str(),
              data.count, cfg.train.scheme.to_string().c_str(), cfg.train.epochs);

  const auto result = train::train(cfg.arch, data, cfg.train);

  fs::create_directories(out_dir);
  const auto q = quantize_weights(result.model.arch, result.model.weights, cfg.train.scheme);
  io::Checkpoint ckpt{result.model.arch, quant::dequantize(q), q};
  const fs::path ckpt_path = fs::path(out_dir) / (cfg.model_name + ".bnn");
  io::save_checkpoint(ckpt_path.string(), ckpt);

  const fs::path trace_path = fs::path(out_dir) / (cfg.model_name + "_trace.csv");
  std::ofstream trace(trace_path, std::ios::binary);
  train::write_trace_csv(trace, result.trace);

  std::printf("wrote %s and %s (final clean loss %.6g)\n", ckpt_path.string().c_str(),
              trace_path.string().c_str(), result.trace.back().clean_loss);
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& map_path, const std::string& offsets_csv,
             const std::string& out_dir) {
  const auto cfg = io::parse_config_file(config_path);
  const auto test = load_split(cfg.test_images, cfg.test_labels, cfg.n_test, "test");
  const auto ckpt = io::load_checkpoint(ckpt_path);
  if (ckpt.quantized && !(ckpt.quantized->scheme == cfg.train.scheme)) {
    throw std::runtime_error("eval: checkpoint scheme " + ckpt.quantized->scheme.to_string() +
                             " does not match config scheme " + cfg.train.scheme.to_string());
  }

  const auto chips = faults::sample_chips(cfg.eval_seed, cfg.chips, ckpt.weights.size(),
                                          cfg.train.scheme.precision_m);

  std::vector<eval::ReportRow> rows;
  double te = 0.0;
  for (const double p : cfg.eval_p) {
    const auto panel =
        eval::chip_panel_eval(ckpt.arch, ckpt.weights, cfg.train.scheme, test, chips, p);
    te = panel.te;
    eval::ReportRow row;
    row.model = cfg.model_name;
    row.scheme = cfg.train.scheme;
    row.wmax = cfg.train.wmax;
    row.p_train = cfg.train.p_train;
    row.p_eval = p;
    row.te = panel.te;
    row.rte_mean = panel.rte.mean;
    row.rte_std = panel.rte.stddev;
    row.conf_clean = panel.conf.clean;
    row.conf_perturbed = panel.conf.perturbed;
    row.chips = cfg.chips;
    row.n_test = test.count;
    rows.push_back(row);
    std::printf("p=%.6g: rte %.6g +- %.6g\n", p, panel.rte.mean, panel.rte.stddev);
  }

  fs::create_directories(out_dir);
  const fs::path report_path = fs::path(out_dir) / (cfg.model_name + "_report.csv");
  {
    std::ofstream out(report_path, std::ios::binary);
    eval::write_report_csv(out, rows);
  }
  std::printf("wrote %s (te %.6g)\n", report_path.string().c_str(), te);

  if (!map_path.empty()) {
    const auto map = faults::load_profiled_map_file(map_path);
    std::vector<std::size_t> offsets = offsets_csv.empty()
                                           ? std::vector<std::size_t>{0}
                                           : parse_offsets(offsets_csv);
    const std::uint64_t sample_seed = rng::at(cfg.eval_seed, 0xF11EDULL);
    const double rte = eval::profiled_rte(ckpt.arch, ckpt.weights, cfg.train.scheme, test, map,
                                          offsets, sample_seed);
    const fs::path prof_path = fs::path(out_dir) / (cfg.model_name + "_profiled.csv");
    std::ofstream out(prof_path, std::ios::binary);
    out << "model,map,offsets,sample_seed,rte_mean\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", rte);
    out << cfg.model_name << ',' << map_path << ',';
    for (std::size_t i = 0; i < offsets.size(); ++i) out << (i ? ";" : "") << offsets[i];
    out << ',' << sample_seed << ',' << buf << '\n';
    std::printf("profiled rte over %zu offsets: %.6g (wrote %s)\n", offsets.size(), rte,
                prof_path.string().c_str());
  }
  return 0;
}

int cmd_inject(const std::string& ckpt_path, double p, const std::string& map_path,
               std::size_t offset, std::uint64_t seed, const std::string& out_dir) {
  const auto ckpt = io::load_checkpoint(ckpt_path);
  if (!ckpt.quantized) {
    throw std::runtime_error("inject: checkpoint carries no quantized record");
  }
  const auto& q = *ckpt.quantized;

  quant::QuantizedTensor perturbed;
  if (!map_path.empty()) {
    const auto map = faults::load_profiled_map_file(map_path);
    perturbed = faults::inject_profiled(q, map, offset, seed);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < q.codes.size(); ++i) {
      flips += static_cast<std::size_t>(std::popcount(
          static_cast<unsigned>(q.codes[i] ^ perturbed.codes[i])));
    }
    std::printf("profiled injection: %zu bits flipped (map %s, offset %zu)\n", flips,
                map_path.c_str(), offset);
  } else {
    const faults::ChipField chip(seed, q.weight_count(), q.scheme.precision_m);
    faults::InjectionReport report;
    perturbed = faults::inject_random(q, chip, p, &report);
    std::printf("random injection at p=%.6g: %zu bits flipped, expected p*m*W = %.6g, "
                "%zu weights affected\n",
                p, report.flipped_bits, report.expected_flips, report.affected_weights);
  }

  fs::create_directories(out_dir);
  const fs::path out_path =
      fs::path(out_dir) / (fs::path(ckpt_path).stem().string() + "_perturbed.bnn");
  io::Checkpoint out_ckpt{ckpt.arch, quant::dequantize(perturbed), perturbed};
  io::save_checkpoint(out_path.string(), out_ckpt);
  std::printf("wrote %s\n", out_path.string().c_str());
  return 0;
}

int cmd_bound(std::uint64_t n, std::uint64_t l, double delta) {
  const double eps = eval::prop1_bound(n, l, delta);
  std::printf("epsilon = %.6g\n", eps);
  std::printf("formula: epsilon = sqrt(log((n+1)/delta)/n) * (sqrt(l)+sqrt(n))/sqrt(l)\n");
  std::printf("note: delta = %.6g is the failure probability; the bound on the expected "
              "robust error holds with probability 1 - delta.\n", delta);
  return 0;
}

}  // namespace

std::string config_key_help() {
  std::string help =
      "config file keys (one 'key = value' per line, '#' comments):\n  ";
  const auto& keys = io::config_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    help += keys[i];
    if (i + 1 < keys.size()) help += (i % 7 == 6) ? ",\n  " : ", ";
  }
  help +=
      "\npresets: normal (per-group symmetric signed truncation), rquant\n"
      "(per-group asymmetric unsigned rounding), clipping (rquant + wmax),\n"
      "randbet (clipping + p_train). BITERR_THREADS caps worker threads.";
  return help;
}

int main(int argc, char** argv) {
  CLI::App app{"bit error robustness laboratory for quantized network weights"};
  app.require_subcommand(1);
  app.footer(config_key_help());

  std::string config_path, ckpt_path, map_path, offsets_csv, out_dir = ".";
  double p = 0.0;
  std::size_t offset = 0;
  std::uint64_t seed = 1;
  std::uint64_t bound_n = 0, bound_l = 0;
  double bound_delta = 0.0;

  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("--config", config_path, "experiment config file")->required();
  train_cmd->add_option("--out", out_dir, "output directory");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate TE/RTE over the chip panel");
  eval_cmd->add_option("--config", config_path, "experiment config file")->required();
  eval_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  eval_cmd->add_option("--map", map_path, "profiled bit error map");
  eval_cmd->add_option("--offsets", offsets_csv, "comma-separated map offsets");
  eval_cmd->add_option("--out", out_dir, "output directory");

  auto* inject_cmd = app.add_subcommand("inject", "inject bit errors into a checkpoint");
  inject_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  inject_cmd->add_option("--p", p, "random bit error rate");
  inject_cmd->add_option("--map", map_path, "profiled bit error map");
  inject_cmd->add_option("--offset", offset, "map offset");
  inject_cmd->add_option("--seed", seed, "injection seed");
  inject_cmd->add_option("--out", out_dir, "output directory");

  auto* bound_cmd = app.add_subcommand("bound", "generalization bound on empirical RTE");
  bound_cmd->add_option("n", bound_n, "number of test examples")->required();
  bound_cmd->add_option("l", bound_l, "number of error patterns")->required();
  bound_cmd->add_option("delta", bound_delta, "failure probability")->required();

  auto* selftest_cmd = app.add_subcommand("selftest", "run the invariant suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(config_path, ckpt_path, map_path, offsets_csv, out_dir);
    if (inject_cmd->parsed()) return cmd_inject(ckpt_path, p, map_path, offset, seed, out_dir);
    if (bound_cmd->parsed()) return cmd_bound(bound_n, bound_l, bound_delta);
    if (selftest_cmd->parsed()) return biterr::selftest::run(std::cout) ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
