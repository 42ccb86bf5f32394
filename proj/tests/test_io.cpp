#include <doctest.h>

#include <unistd.h>
#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "biterr/checkpoint.hpp"
#include "biterr/dataset.hpp"
#include "biterr/experiment_config.hpp"
#include "biterr/rng.hpp"
#include "biterr/synth_digits.hpp"

using namespace biterr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("biterr_io_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

void gzip_file(const std::string& src, const std::string& dst) {
  std::ifstream in(src, std::ios::binary);
  std::vector<char> data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  gzFile out = gzopen(dst.c_str(), "wb");
  REQUIRE(out != nullptr);
  REQUIRE(gzwrite(out, data.data(), static_cast<unsigned>(data.size())) ==
          static_cast<int>(data.size()));
  gzclose(out);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("idx: hand-crafted single-image fixture parses bit-exactly") {
  TempDir tmp;
  // 1 image of 2x3 with known bytes.
  const std::vector<std::uint8_t> pixels{0, 51, 102, 153, 204, 255};
  io::write_idx_images(tmp.file("img"), 1, 2, 3, pixels);
  io::write_idx_labels(tmp.file("lab"), {7});
  const auto ds = io::load_idx(tmp.file("img"), tmp.file("lab"));
  CHECK(ds.count == 1);
  CHECK(ds.rows == 2);
  CHECK(ds.cols == 3);
  CHECK(ds.labels[0] == 7);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    CHECK(ds.pixels[i] == doctest::Approx(pixels[i] / 255.0));
  }
}

TEST_CASE("idx: label magic fed to the image parser is rejected") {
  TempDir tmp;
  // Enough labels that the file is longer than an image header, so the
  // failure is the magic mismatch rather than truncation.
  io::write_idx_labels(tmp.file("lab"), {1, 2, 3, 4, 5, 6, 7, 8, 9, 0, 1, 2});
  CHECK_THROWS_WITH_AS(io::load_idx(tmp.file("lab"), tmp.file("lab")),
                       doctest::Contains("magic"), std::runtime_error);
}

TEST_CASE("idx: image/label count mismatch is rejected") {
  TempDir tmp;
  io::write_idx_images(tmp.file("img"), 2, 1, 2, {1, 2, 3, 4});
  io::write_idx_labels(tmp.file("lab"), {1, 2, 3});
  CHECK_THROWS_WITH_AS(io::load_idx(tmp.file("img"), tmp.file("lab")),
                       doctest::Contains("count mismatch"), std::runtime_error);
}

TEST_CASE("idx: truncated file is rejected") {
  TempDir tmp;
  io::write_idx_images(tmp.file("img"), 2, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  // Chop the last byte off.
  auto bytes = io::read_file_maybe_gzip(tmp.file("img"));
  bytes.pop_back();
  std::ofstream out(tmp.file("img2"), std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.close();
  io::write_idx_labels(tmp.file("lab"), {1, 2});
  CHECK_THROWS(io::load_idx(tmp.file("img2"), tmp.file("lab")));
}

TEST_CASE("idx: gzip files decompress transparently to identical data") {
  TempDir tmp;
  std::vector<std::uint8_t> pixels, labels;
  io::SynthOptions opt;
  opt.count = 20;
  io::generate_synth_digits(opt, pixels, labels);
  io::write_idx_images(tmp.file("img"), 20, 28, 28, pixels);
  io::write_idx_labels(tmp.file("lab"), labels);
  gzip_file(tmp.file("img"), tmp.file("img.gz"));
  gzip_file(tmp.file("lab"), tmp.file("lab.gz"));
  const auto plain = io::load_idx(tmp.file("img"), tmp.file("lab"));
  const auto gz = io::load_idx(tmp.file("img.gz"), tmp.file("lab.gz"));
  CHECK(plain.pixels == gz.pixels);
  CHECK(plain.labels == gz.labels);
}

TEST_CASE("checkpoint: BNN1 round trip preserves weights bit-exactly") {
  TempDir tmp;
  const net::Architecture arch{{6, 5, 3}};
  auto model = net::Model::init(arch, 77);
  io::Checkpoint ckpt{arch, model.weights, std::nullopt};
  io::save_checkpoint(tmp.file("m.bnn"), ckpt);
  const auto back = io::load_checkpoint(tmp.file("m.bnn"));
  CHECK(back.arch.dims == arch.dims);
  CHECK(back.weights == model.weights);
  CHECK_FALSE(back.quantized.has_value());
}

TEST_CASE("checkpoint: BQT1 record round trips codes, params and scheme") {
  TempDir tmp;
  const net::Architecture arch{{6, 5, 3}};
  auto model = net::Model::init(arch, 78);
  const auto scheme = quant::QuantScheme::rquant(4);
  const auto groups = arch.weight_groups();
  const auto params = quant::fit_range(model.weights, groups, scheme);
  const auto q = quant::quantize(model.weights, groups, params, scheme);

  io::Checkpoint ckpt{arch, quant::dequantize(q), q};
  io::save_checkpoint(tmp.file("q.bnn"), ckpt);
  const auto back = io::load_checkpoint(tmp.file("q.bnn"));
  REQUIRE(back.quantized.has_value());
  CHECK(back.quantized->codes == q.codes);
  CHECK(back.quantized->scheme == scheme);
  REQUIRE(back.quantized->groups.size() == q.groups.size());
  for (std::size_t g = 0; g < q.groups.size(); ++g) {
    CHECK(back.quantized->groups[g] == q.groups[g]);
    CHECK(back.quantized->params[g].qmin == q.params[g].qmin);
    CHECK(back.quantized->params[g].qmax == q.params[g].qmax);
  }
}

TEST_CASE("checkpoint: BQT1 binary layout is pinned") {
  // magic, m, range mode, integer repr, rounding, group count, one group
  // record, then the code bytes.
  quant::QuantizedTensor q;
  q.scheme = quant::QuantScheme::rquant(8);
  q.groups = {quant::GroupRange{0, 2}};
  q.params = {quant::QuantParams{-1.0, 1.0}};
  q.codes = {0x12, 0x34};
  std::ostringstream out(std::ios::binary);
  io::write_bqt(out, q);
  const std::string bytes = out.str();
  REQUIRE(bytes.size() == 4 + 4 + 4 + (8 + 8 + 8 + 8) + 2);
  CHECK(bytes.substr(0, 4) == "BQT1");
  CHECK(bytes[4] == 8);                          // m
  CHECK(bytes[5] == 1);                          // asymmetric
  CHECK(bytes[6] == 1);                          // unsigned
  CHECK(bytes[7] == 1);                          // round-nearest
  CHECK(static_cast<unsigned char>(bytes[8]) == 1);  // group count LE
  CHECK(bytes[bytes.size() - 2] == 0x12);
  CHECK(bytes[bytes.size() - 1] == 0x34);
}

TEST_CASE("checkpoint: single global group reads back as Global granularity") {
  std::ostringstream out(std::ios::binary);
  quant::QuantizedTensor q;
  q.scheme = quant::QuantScheme::make(8, quant::Granularity::Global,
                                      quant::RangeMode::Symmetric,
                                      quant::IntegerRepr::SignedTwosComplement,
                                      quant::Rounding::Truncate);
  q.groups = {quant::GroupRange{0, 3}};
  q.params = {quant::QuantParams{-0.5, 0.5}};
  q.codes = {1, 2, 3};
  io::write_bqt(out, q);
  std::istringstream in(out.str(), std::ios::binary);
  const auto back = io::read_bqt(in);
  CHECK(back.scheme.granularity == quant::Granularity::Global);
}

TEST_CASE("config: presets expand to the documented schemes") {
  std::istringstream normal("preset = normal\n");
  auto c1 = io::parse_config(normal);
  CHECK(c1.train.scheme == quant::QuantScheme::normal(8));

  std::istringstream rquant("preset = rquant\nprecision_m = 4\n");
  auto c2 = io::parse_config(rquant);
  CHECK(c2.train.scheme == quant::QuantScheme::rquant(4));

  std::istringstream clipping("preset = clipping\nwmax = 0.1\n");
  auto c3 = io::parse_config(clipping);
  CHECK(c3.train.scheme == quant::QuantScheme::rquant(8));
  CHECK(c3.train.wmax == doctest::Approx(0.1));
}

TEST_CASE("config: randbet preset requires wmax and p_train") {
  std::istringstream missing("preset = randbet\nwmax = 0.1\n");
  CHECK_THROWS_WITH_AS(io::parse_config(missing), doctest::Contains("requires"),
                       std::runtime_error);
  std::istringstream ok("preset = randbet\nwmax = 0.1\np_train = 0.01\n");
  const auto cfg = io::parse_config(ok);
  CHECK(cfg.train.p_train == doctest::Approx(0.01));
}

TEST_CASE("config: unknown keys are rejected, comments and order are fine") {
  std::istringstream bad("preset = normal\nbogus_key = 1\n");
  CHECK_THROWS_WITH_AS(io::parse_config(bad), doctest::Contains("unknown key"),
                       std::runtime_error);
  std::istringstream ooo("wmax = 0.2\n# comment\n\npreset = clipping\nrounding = truncate\n");
  const auto cfg = io::parse_config(ooo);
  CHECK(cfg.train.wmax == doctest::Approx(0.2));
  CHECK(cfg.train.scheme.rounding == quant::Rounding::Truncate);  // override wins
  CHECK(cfg.train.scheme.range_mode == quant::RangeMode::Asymmetric);
}

TEST_CASE("config: eval sweep list and misc keys parse") {
  std::istringstream in(
      "preset = rquant\neval_p = 0,0.001,0.01\nchips = 7\nn_test = 500\n"
      "arch = 784-32-10\nmaster_seed = 42\nmodel_name = demo\n");
  const auto cfg = io::parse_config(in);
  CHECK(cfg.eval_p == std::vector<double>{0.0, 0.001, 0.01});
  CHECK(cfg.chips == 7);
  CHECK(cfg.n_test == 500);
  CHECK(cfg.arch.dims == std::vector<std::size_t>{784, 32, 10});
  CHECK(cfg.train.master_seed == 42);
  CHECK(cfg.model_name == "demo");
}

TEST_CASE("synthetic digits are deterministic in the seed") {
  io::SynthOptions opt;
  opt.count = 10;
  opt.seed = 5;
  std::vector<std::uint8_t> p1, l1, p2, l2;
  io::generate_synth_digits(opt, p1, l1);
  io::generate_synth_digits(opt, p2, l2);
  CHECK(p1 == p2);
  CHECK(l1 == l2);
  opt.seed = 6;
  io::generate_synth_digits(opt, p2, l2);
  CHECK(p1 != p2);
}

}  // TEST_SUITE
