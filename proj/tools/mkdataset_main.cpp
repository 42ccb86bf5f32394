// biterr-mkdata: deterministic synthetic digit dataset in IDX format.
// Produces train/test image and label files compatible with `biterr train`.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>

#include "biterr/dataset.hpp"
#include "biterr/rng.hpp"
#include "biterr/synth_digits.hpp"

namespace fs = std::filesystem;
using namespace biterr;

int main(int argc, char** argv) {
  CLI::App app{"generate a deterministic synthetic digit dataset (IDX format)"};
  std::string out_dir = ".";
  std::size_t train_count = 10000;
  std::size_t test_count = 2000;
  std::uint64_t seed = 7;
  double noise = 0.10;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--train", train_count, "training examples");
  app.add_option("--test", test_count, "test examples");
  app.add_option("--seed", seed, "dataset seed");
  app.add_option("--noise", noise, "pixel noise sigma");
  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out_dir);
    io::SynthOptions opt;
    opt.noise_sigma = noise;

    std::vector<std::uint8_t> pixels, labels;
    opt.count = train_count;
    opt.seed = rng::at(seed, 1);
    io::generate_synth_digits(opt, pixels, labels);
    io::write_idx_images((fs::path(out_dir) / "train-images.idx3-ubyte").string(), train_count,
                         28, 28, pixels);
    io::write_idx_labels((fs::path(out_dir) / "train-labels.idx1-ubyte").string(), labels);

    opt.count = test_count;
    opt.seed = rng::at(seed, 2);
    io::generate_synth_digits(opt, pixels, labels);
    io::write_idx_images((fs::path(out_dir) / "test-images.idx3-ubyte").string(), test_count, 28,
                         28, pixels);
    io::write_idx_labels((fs::path(out_dir) / "test-labels.idx1-ubyte").string(), labels);

    std::printf("wrote %zu train and %zu test examples to %s\n", train_count, test_count,
                out_dir.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
