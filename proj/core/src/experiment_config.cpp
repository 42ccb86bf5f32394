#include "biterr/experiment_config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace biterr::io {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw std::runtime_error("config: bad number for '" + key + "': " + v);
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::uint64_t u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return u;
  } catch (...) {
    throw std::runtime_error("config: bad integer for '" + key + "': " + v);
  }
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "preset",        "model_name",   "arch",          "precision_m",  "granularity",
      "range_mode",    "integer_repr", "rounding",      "epochs",       "batch_size",
      "lr",            "momentum",     "weight_decay",  "wmax",         "p_train",
      "lambda",        "gate_threshold", "loss",        "smooth_target", "master_seed",
      "train_images",  "train_labels", "test_images",   "test_labels",  "train_limit",
      "n_test",        "eval_p",       "chips",         "eval_seed",
  };
  return keys;
}

ExperimentConfig parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(line_no) +
                               " is not 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw std::runtime_error("config: unknown key '" + key + "'");
    }
    if (kv.count(key)) throw std::runtime_error("config: duplicate key '" + key + "'");
    kv[key] = value;
  }

  ExperimentConfig cfg;
  auto take = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) return {};
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  // Scheme axes collected first; the preset supplies defaults.
  int m = 8;
  if (const auto v = take("precision_m"); !v.empty()) m = static_cast<int>(to_u64("precision_m", v));

  cfg.preset = take("preset");
  quant::Granularity gran = quant::Granularity::PerGroup;
  quant::RangeMode range = quant::RangeMode::Symmetric;
  quant::IntegerRepr repr = quant::IntegerRepr::SignedTwosComplement;
  quant::Rounding rounding = quant::Rounding::Truncate;
  if (cfg.preset.empty() || cfg.preset == "normal") {
    // symmetric signed truncation, no clipping, no injection
  } else if (cfg.preset == "rquant" || cfg.preset == "clipping" || cfg.preset == "randbet") {
    range = quant::RangeMode::Asymmetric;
    repr = quant::IntegerRepr::Unsigned;
    rounding = quant::Rounding::RoundNearest;
  } else {
    throw std::runtime_error("config: unknown preset '" + cfg.preset + "'");
  }

  if (const auto v = take("granularity"); !v.empty()) {
    if (v == "global") gran = quant::Granularity::Global;
    else if (v == "pergroup") gran = quant::Granularity::PerGroup;
    else throw std::runtime_error("config: granularity must be global|pergroup");
  }
  if (const auto v = take("range_mode"); !v.empty()) {
    if (v == "symmetric") range = quant::RangeMode::Symmetric;
    else if (v == "asymmetric") range = quant::RangeMode::Asymmetric;
    else throw std::runtime_error("config: range_mode must be symmetric|asymmetric");
  }
  if (const auto v = take("integer_repr"); !v.empty()) {
    if (v == "signed") repr = quant::IntegerRepr::SignedTwosComplement;
    else if (v == "unsigned") repr = quant::IntegerRepr::Unsigned;
    else throw std::runtime_error("config: integer_repr must be signed|unsigned");
  }
  if (const auto v = take("rounding"); !v.empty()) {
    if (v == "truncate") rounding = quant::Rounding::Truncate;
    else if (v == "nearest") rounding = quant::Rounding::RoundNearest;
    else throw std::runtime_error("config: rounding must be truncate|nearest");
  }
  cfg.train.scheme = quant::QuantScheme::make(m, gran, range, repr, rounding);

  if (const auto v = take("arch"); !v.empty()) {
    cfg.arch.dims.clear();
    std::istringstream as(v);
    std::string part;
    while (std::getline(as, part, '-')) cfg.arch.dims.push_back(to_u64("arch", part));
    if (cfg.arch.dims.size() < 2) throw std::runtime_error("config: arch needs >= 2 dims");
  }

  if (const auto v = take("epochs"); !v.empty()) cfg.train.epochs = static_cast<int>(to_u64("epochs", v));
  if (const auto v = take("batch_size"); !v.empty()) cfg.train.batch_size = to_u64("batch_size", v);
  if (const auto v = take("lr"); !v.empty()) cfg.train.lr0 = to_double("lr", v);
  if (const auto v = take("momentum"); !v.empty()) cfg.train.momentum = to_double("momentum", v);
  if (const auto v = take("weight_decay"); !v.empty()) cfg.train.weight_decay = to_double("weight_decay", v);
  if (const auto v = take("wmax"); !v.empty()) cfg.train.wmax = to_double("wmax", v);
  if (const auto v = take("p_train"); !v.empty()) cfg.train.p_train = to_double("p_train", v);
  if (const auto v = take("lambda"); !v.empty()) cfg.train.lambda = to_double("lambda", v);
  if (const auto v = take("gate_threshold"); !v.empty()) cfg.train.gate_threshold = to_double("gate_threshold", v);
  if (const auto v = take("loss"); !v.empty()) {
    if (v == "ce") cfg.train.loss.kind = net::LossKind::CrossEntropy;
    else if (v == "label_smoothed") cfg.train.loss.kind = net::LossKind::LabelSmoothed;
    else throw std::runtime_error("config: loss must be ce|label_smoothed");
  }
  if (const auto v = take("smooth_target"); !v.empty()) cfg.train.loss.smooth_target = to_double("smooth_target", v);
  if (const auto v = take("master_seed"); !v.empty()) cfg.train.master_seed = to_u64("master_seed", v);

  cfg.model_name = take("model_name");
  if (cfg.model_name.empty()) cfg.model_name = cfg.preset.empty() ? "custom" : cfg.preset;

  cfg.train_images = take("train_images");
  cfg.train_labels = take("train_labels");
  cfg.test_images = take("test_images");
  cfg.test_labels = take("test_labels");
  if (const auto v = take("train_limit"); !v.empty()) cfg.train_limit = to_u64("train_limit", v);
  if (const auto v = take("n_test"); !v.empty()) cfg.n_test = to_u64("n_test", v);
  if (const auto v = take("eval_p"); !v.empty()) {
    cfg.eval_p.clear();
    std::istringstream ps(v);
    std::string part;
    while (std::getline(ps, part, ',')) cfg.eval_p.push_back(to_double("eval_p", trim(part)));
    if (cfg.eval_p.empty()) throw std::runtime_error("config: eval_p must list at least one rate");
  }
  if (const auto v = take("chips"); !v.empty()) cfg.chips = static_cast<int>(to_u64("chips", v));
  if (const auto v = take("eval_seed"); !v.empty()) cfg.eval_seed = to_u64("eval_seed", v);

  // Preset completeness checks.
  if (cfg.preset == "clipping" && !cfg.train.wmax) {
    throw std::runtime_error("config: preset 'clipping' requires wmax");
  }
  if (cfg.preset == "randbet" && (!cfg.train.wmax || !cfg.train.p_train)) {
    throw std::runtime_error("config: preset 'randbet' requires wmax and p_train");
  }
  if (cfg.preset == "normal" || cfg.preset == "rquant") {
    if (cfg.train.p_train) {
      throw std::runtime_error("config: preset '" + cfg.preset + "' does not inject bit errors");
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  return parse_config(in);
}

}  // namespace biterr::io
