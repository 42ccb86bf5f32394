#include "biterr/synth_digits.hpp"

#include <algorithm>
#include <cmath>

#include "biterr/rng.hpp"

namespace biterr::io {

namespace {

constexpr int kImage = 28;
constexpr int kGlyphW = 5;
constexpr int kGlyphH = 7;

// 5x7 pixel font, one row per digit, 7 rows of 5 bits (MSB = leftmost).
constexpr std::uint8_t kGlyphs[10][kGlyphH] = {
    {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110},  // 0
    {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110},  // 1
    {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111},  // 2
    {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110},  // 3
    {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010},  // 4
    {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110},  // 5
    {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110},  // 6
    {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000},  // 7
    {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110},  // 8
    {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100},  // 9
};

double glyph_at(int digit, int gx, int gy) {
  if (gx < 0 || gx >= kGlyphW || gy < 0 || gy >= kGlyphH) return 0.0;
  return (kGlyphs[digit][gy] >> (kGlyphW - 1 - gx)) & 1u ? 1.0 : 0.0;
}

// Bilinear sample of the glyph bitmap at continuous coordinates.
double glyph_sample(int digit, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = glyph_at(digit, x0, y0);
  const double v10 = glyph_at(digit, x0 + 1, y0);
  const double v01 = glyph_at(digit, x0, y0 + 1);
  const double v11 = glyph_at(digit, x0 + 1, y0 + 1);
  return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

double gaussian(rng::Stream& s) {
  // Box-Muller; the log argument is kept away from zero.
  const double u1 = std::max(s.next_unit(), 1e-12);
  const double u2 = s.next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void render_one(int digit, rng::Stream& s, const SynthOptions& opt, std::uint8_t* out) {
  const double scale = s.next_in(opt.min_scale, opt.max_scale);
  const double angle = s.next_in(-opt.max_rotation, opt.max_rotation);
  const double jitter = 3.0;
  const double cx = kImage * 0.5 + s.next_in(-jitter, jitter);
  const double cy = kImage * 0.5 + s.next_in(-jitter, jitter);
  const double amp = s.next_in(0.55, 1.0);
  const double cos_a = std::cos(angle);
  const double sin_a = std::sin(angle);

  for (int py = 0; py < kImage; ++py) {
    for (int px = 0; px < kImage; ++px) {
      // Inverse affine: image -> glyph coordinates.
      const double dx = px - cx;
      const double dy = py - cy;
      const double rx = cos_a * dx + sin_a * dy;
      const double ry = -sin_a * dx + cos_a * dy;
      const double gx = rx / scale + kGlyphW * 0.5 - 0.5;
      const double gy = ry / scale + kGlyphH * 0.5 - 0.5;
      double v = amp * glyph_sample(digit, gx, gy);
      v += opt.noise_sigma * gaussian(s);
      v = std::clamp(v, 0.0, 1.0);
      out[py * kImage + px] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
}

}  // namespace

void generate_synth_digits(const SynthOptions& opt, std::vector<std::uint8_t>& pixels_out,
                           std::vector<std::uint8_t>& labels_out) {
  pixels_out.assign(opt.count * kImage * kImage, 0);
  labels_out.assign(opt.count, 0);
  for (std::size_t i = 0; i < opt.count; ++i) {
    rng::Stream s(rng::at(opt.seed, i));
    const int digit = static_cast<int>(s.next_below(10));
    labels_out[i] = static_cast<std::uint8_t>(digit);
    render_one(digit, s, opt, pixels_out.data() + i * kImage * kImage);
  }
}

Dataset synth_digits_dataset(const SynthOptions& opt) {
  std::vector<std::uint8_t> pixels, labels;
  generate_synth_digits(opt, pixels, labels);
  Dataset ds;
  ds.count = opt.count;
  ds.rows = kImage;
  ds.cols = kImage;
  ds.pixels.resize(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) ds.pixels[i] = pixels[i] / 255.0;
  ds.labels = std::move(labels);
  return ds;
}

}  // namespace biterr::io
