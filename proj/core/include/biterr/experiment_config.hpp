#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "biterr/network.hpp"
#include "biterr/training.hpp"

// Experiment configuration: one `key = value` per line, '#' comments.
// Unknown keys are rejected. Presets expand to the four training modes;
// explicit keys override preset defaults regardless of order in the file.

namespace biterr::io {

struct ExperimentConfig {
  std::string preset;  // normal | rquant | clipping | randbet | (empty = custom)
  std::string model_name;
  net::Architecture arch{{784, 256, 128, 10}};
  train::TrainConfig train;

  std::string train_images, train_labels;
  std::string test_images, test_labels;
  std::size_t train_limit = 0;  // 0 = all examples
  std::size_t n_test = 0;       // 0 = all examples

  std::vector<double> eval_p{0.0};
  int chips = 50;  // evaluation protocol default; desk configs usually set 20
  std::uint64_t eval_seed = 0xC0FFEE;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::string& path);

// The documented key list (used by --help and the key validator).
const std::vector<std::string>& config_keys();

}  // namespace biterr::io
