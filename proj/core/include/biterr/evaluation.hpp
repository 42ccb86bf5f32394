#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biterr/bit_errors.hpp"
#include "biterr/dataset.hpp"
#include "biterr/network.hpp"
#include "biterr/quantization.hpp"

// Robustness metrics: clean test error (TE), robust test error (RTE) over a
// panel of sampled chips, profiled-map replay, confidence statistics, and
// the Hoeffding-style generalization bound on the empirical RTE.

namespace biterr::eval {

// Fraction of argmax-misclassified examples (ties resolve to the lowest
// class index).
double test_error(const net::Architecture& arch, std::span<const double> weights,
                  const io::Dataset& test_set);

struct RteResult {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, (K-1) divisor, 0 for K = 1
  std::vector<double> per_chip;
};

// For each chip: quantize the final weights, inject bit errors at rate p,
// dequantize, evaluate TE. Chip order does not affect the result.
RteResult robust_test_error(const net::Architecture& arch, std::span<const double> weights,
                            const quant::QuantScheme& scheme, const io::Dataset& test_set,
                            std::span<const faults::ChipField> chips, double p);

// Average TE over the given weight-to-memory offsets of a profiled map.
double profiled_rte(const net::Architecture& arch, std::span<const double> weights,
                    const quant::QuantScheme& scheme, const io::Dataset& test_set,
                    const faults::ProfiledMap& map, std::span<const std::size_t> offsets,
                    std::uint64_t sample_seed);

// With probability 1 - delta the expected robust error exceeds the empirical
// RTE (n test examples, l error patterns) by less than
//   epsilon = sqrt(log((n+1)/delta) / n) * (sqrt(l) + sqrt(n)) / sqrt(l).
// delta is the failure probability.
double prop1_bound(std::uint64_t n, std::uint64_t l, double delta);

struct ConfidenceStats {
  double clean = 0.0;      // mean softmax probability of the predicted class
  double perturbed = 0.0;  // same, averaged over the chip panel at rate p
};

ConfidenceStats confidence_stats(const net::Architecture& arch, std::span<const double> weights,
                                 const quant::QuantScheme& scheme, const io::Dataset& test_set,
                                 std::span<const faults::ChipField> chips, double p);

// One pass over the chip panel yielding TE, RTE and confidences together
// (robust_test_error and confidence_stats are views of this).
struct PanelResult {
  double te = 0.0;
  RteResult rte;
  ConfidenceStats conf;
};
PanelResult chip_panel_eval(const net::Architecture& arch, std::span<const double> weights,
                            const quant::QuantScheme& scheme, const io::Dataset& test_set,
                            std::span<const faults::ChipField> chips, double p);

// One row of the evaluation report CSV.
struct ReportRow {
  std::string model;
  quant::QuantScheme scheme;
  std::optional<double> wmax;
  std::optional<double> p_train;
  double p_eval = 0.0;
  double te = 0.0;
  double rte_mean = 0.0;
  double rte_std = 0.0;
  double conf_clean = 0.0;
  double conf_perturbed = 0.0;
  int chips = 0;
  std::size_t n_test = 0;
};

// Fixed column order, LF line endings, floats at 6 significant digits.
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);

}  // namespace biterr::eval
