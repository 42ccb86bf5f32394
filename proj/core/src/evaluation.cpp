#include "biterr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace biterr::eval {

namespace {

struct EvalCounts {
  std::size_t errors = 0;
  double confidence_sum = 0.0;
};

EvalCounts evaluate(const net::Architecture& arch, std::span<const double> weights,
                    const io::Dataset& ds) {
  if (ds.count == 0) throw std::invalid_argument("eval: empty test set");
  const std::size_t classes = arch.class_count();
  // Chunked forward keeps the activation working set small.
  constexpr std::size_t kChunk = 512;
  std::vector<double> logits(kChunk * classes);
  std::vector<double> probs(classes);
  EvalCounts counts;
  for (std::size_t start = 0; start < ds.count; start += kChunk) {
    const std::size_t n = std::min(kChunk, ds.count - start);
    net::forward(arch, weights,
                 std::span<const double>(ds.pixels.data() + start * ds.dim(), n * ds.dim()), n,
                 std::span<double>(logits.data(), n * classes));
    for (std::size_t r = 0; r < n; ++r) {
      const double* row = logits.data() + r * classes;
      std::size_t best = 0;
      for (std::size_t k = 1; k < classes; ++k) {
        if (row[k] > row[best]) best = k;
      }
      if (best != ds.labels[start + r]) ++counts.errors;
      net::softmax_row(std::span<const double>(row, classes), probs);
      counts.confidence_sum += probs[best];
    }
  }
  return counts;
}

quant::QuantizedTensor quantize_model(const net::Architecture& arch,
                                      std::span<const double> weights,
                                      const quant::QuantScheme& scheme) {
  const auto natural = arch.weight_groups();
  const auto groups = quant::effective_groups(scheme, natural, weights.size());
  const auto params = quant::fit_range(weights, groups, scheme);
  return quant::quantize(weights, groups, params, scheme);
}

}  // namespace

double test_error(const net::Architecture& arch, std::span<const double> weights,
                  const io::Dataset& test_set) {
  const auto counts = evaluate(arch, weights, test_set);
  return static_cast<double>(counts.errors) / static_cast<double>(test_set.count);
}

PanelResult chip_panel_eval(const net::Architecture& arch, std::span<const double> weights,
                            const quant::QuantScheme& scheme, const io::Dataset& test_set,
                            std::span<const faults::ChipField> chips, double p) {
  if (chips.empty()) throw std::invalid_argument("eval: need at least one chip");
  const auto q = quantize_model(arch, weights, scheme);
  const double n = static_cast<double>(test_set.count);

  PanelResult res;
  res.rte.per_chip.resize(chips.size());
  {
    const auto wq = quant::dequantize(q);
    const auto clean = evaluate(arch, wq, test_set);
    res.te = static_cast<double>(clean.errors) / n;
    res.conf.clean = clean.confidence_sum / n;
  }

  if (p == 0.0) {
    // Every chip's error set is empty; the panel degenerates to the clean run.
    std::fill(res.rte.per_chip.begin(), res.rte.per_chip.end(), res.te);
    res.rte.mean = res.te;
    res.rte.stddev = 0.0;
    res.conf.perturbed = res.conf.clean;
    return res;
  }

  double conf_sum = 0.0;
  for (std::size_t c = 0; c < chips.size(); ++c) {
    const auto corrupted = faults::inject_random(q, chips[c], p);
    const auto wq = quant::dequantize(corrupted);
    const auto counts = evaluate(arch, wq, test_set);
    res.rte.per_chip[c] = static_cast<double>(counts.errors) / n;
    conf_sum += counts.confidence_sum / n;
  }

  double sum = 0.0;
  for (double v : res.rte.per_chip) sum += v;
  res.rte.mean = sum / static_cast<double>(res.rte.per_chip.size());
  if (res.rte.per_chip.size() > 1) {
    double ss = 0.0;
    for (double v : res.rte.per_chip) ss += (v - res.rte.mean) * (v - res.rte.mean);
    res.rte.stddev = std::sqrt(ss / static_cast<double>(res.rte.per_chip.size() - 1));
  }
  res.conf.perturbed = conf_sum / static_cast<double>(chips.size());
  return res;
}

RteResult robust_test_error(const net::Architecture& arch, std::span<const double> weights,
                            const quant::QuantScheme& scheme, const io::Dataset& test_set,
                            std::span<const faults::ChipField> chips, double p) {
  return chip_panel_eval(arch, weights, scheme, test_set, chips, p).rte;
}

double profiled_rte(const net::Architecture& arch, std::span<const double> weights,
                    const quant::QuantScheme& scheme, const io::Dataset& test_set,
                    const faults::ProfiledMap& map, std::span<const std::size_t> offsets,
                    std::uint64_t sample_seed) {
  if (offsets.empty()) throw std::invalid_argument("eval: need at least one offset");
  const auto q = quantize_model(arch, weights, scheme);
  double sum = 0.0;
  for (const std::size_t off : offsets) {
    const auto corrupted = faults::inject_profiled(q, map, off, sample_seed);
    const auto wq = quant::dequantize(corrupted);
    sum += test_error(arch, wq, test_set);
  }
  return sum / static_cast<double>(offsets.size());
}

double prop1_bound(std::uint64_t n, std::uint64_t l, double delta) {
  if (n < 1 || l < 1) throw std::invalid_argument("eval: n and l must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("eval: delta must be in (0, 1)");
  const double nd = static_cast<double>(n);
  const double ld = static_cast<double>(l);
  return std::sqrt(std::log((nd + 1.0) / delta) / nd) * (std::sqrt(ld) + std::sqrt(nd)) /
         std::sqrt(ld);
}

ConfidenceStats confidence_stats(const net::Architecture& arch, std::span<const double> weights,
                                 const quant::QuantScheme& scheme, const io::Dataset& test_set,
                                 std::span<const faults::ChipField> chips, double p) {
  return chip_panel_eval(arch, weights, scheme, test_set, chips, p).conf;
}

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << "model,scheme,m,wmax,p_train,p_eval,te,rte_mean,rte_std,"
         "conf_clean,conf_perturbed,chips,n_test\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.6g%c", v, sep);
    out << buf;
  };
  auto put_opt = [&](const std::optional<double>& v, char sep) {
    if (v) {
      put(*v, sep);
    } else {
      out << "none" << sep;
    }
  };
  for (const auto& r : rows) {
    out << r.model << ',' << r.scheme.to_string() << ',' << r.scheme.precision_m << ',';
    put_opt(r.wmax, ',');
    put_opt(r.p_train, ',');
    put(r.p_eval, ',');
    put(r.te, ',');
    put(r.rte_mean, ',');
    put(r.rte_std, ',');
    put(r.conf_clean, ',');
    put(r.conf_perturbed, ',');
    out << r.chips << ',' << r.n_test << '\n';
  }
}

}  // namespace biterr::eval
