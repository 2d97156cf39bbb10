#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "simpack/pnm.hpp"
#include "simpack/rng.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return SIMPACK_TEST_DATA; }

/// Grayscale test card: soft gradient plus seeded Gaussian blobs of mixed
/// sizes and polarity, and a few hard-edged squares.
inline simpack::RawImage textured(std::uint32_t w, std::uint32_t h, std::uint64_t seed) {
  simpack::Rng rng(seed);
  std::vector<double> v(std::size_t{w} * h);
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) v[std::size_t{y} * w + x] = 90 + 40.0 * x / w + 20.0 * y / h;
  for (int b = 0; b < 60; ++b) {
    const double cx = rng.uniform(0, w), cy = rng.uniform(0, h), s = rng.uniform(1.5, 7);
    const double amp = rng.uniform(40, 90) * (rng.below(2) ? 1 : -1);
    const int r = static_cast<int>(std::ceil(3 * s));
    for (int y = std::max(0, int(cy) - r); y <= std::min(int(h) - 1, int(cy) + r); ++y)
      for (int x = std::max(0, int(cx) - r); x <= std::min(int(w) - 1, int(cx) + r); ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        v[std::size_t(y) * w + x] += amp * std::exp(-d2 / (2 * s * s));
      }
  }
  for (int q = 0; q < 8; ++q) {
    const int x0 = static_cast<int>(rng.below(w - 24)), y0 = static_cast<int>(rng.below(h - 24));
    const int side = static_cast<int>(rng.range(8, 20));
    const double level = rng.uniform(0, 255);
    for (int y = y0; y < y0 + side; ++y)
      for (int x = x0; x < x0 + side; ++x) v[std::size_t(y) * w + x] = level;
  }
  simpack::RawImage img{w, h, 1, 255, {}};
  img.pixels.resize(v.size());
  for (std::size_t k = 0; k < v.size(); ++k)
    img.pixels[k] = static_cast<std::uint8_t>(std::clamp(std::lround(v[k]), 0L, 255L));
  return img;
}

/// Independent uniform noise per pixel.
inline simpack::RawImage noise(std::uint32_t w, std::uint32_t h, std::uint64_t seed) {
  simpack::Rng rng(seed);
  simpack::RawImage img{w, h, 1, 255, {}};
  img.pixels.resize(std::size_t{w} * h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

/// Rotates 90 degrees clockwise: input (x, y) lands on (h - 1 - y, x).
inline simpack::RawImage rotate90(const simpack::RawImage& in) {
  simpack::RawImage out{in.height, in.width, in.channels, in.maxval, {}};
  out.pixels.resize(in.pixels.size());
  const std::size_t c = in.channels;
  for (std::uint32_t y = 0; y < in.height; ++y)
    for (std::uint32_t x = 0; x < in.width; ++x)
      for (std::size_t k = 0; k < c; ++k)
        out.pixels[(std::size_t{x} * out.width + (in.height - 1 - y)) * c + k] =
            in.pixels[(std::size_t{y} * in.width + x) * c + k];
  return out;
}

inline simpack::Bytes random_bytes(std::size_t n, std::uint64_t seed) {
  simpack::Rng rng(seed);
  simpack::Bytes b(n);
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    const std::uint64_t v = rng.next();
    for (int j = 0; j < 8; ++j) b[k + j] = static_cast<std::uint8_t>(v >> (8 * j));
  }
  for (; k < n; ++k) b[k] = static_cast<std::uint8_t>(rng.next());
  return b;
}

struct PnmFixture {
  const char* file;
  std::uint32_t width, height, channels, maxval;
  const char* payload_sha256;  // decoded by Pillow's netpbm reader (8-bit files) or by header offset
};

/// Valid files under data/pnm with payload digests frozen from an
/// independent reader.
inline const PnmFixture kValidPnm[] = {
    {"p5_1x1.pgm", 1, 1, 1, 255, "76be8b528d0075f7aae98d6fa57a6d3c83ae480a8469e668d7b0af968995ac71"},
    {"p5_1x64.pgm", 1, 64, 1, 255, "426c6370a86a994e502ba35652723475714f29dd8b006504904d3b5ad3ce56db"},
    {"p5_2x2.pgm", 2, 2, 1, 255, "054edec1d0211f624fed0cbca9d4f9400b0e491c43742af2c5b0abebf0c990d8"},
    {"p5_64x1.pgm", 64, 1, 1, 255, "8eb36431457676b9b2da90e3d6d9d16650234c8d90598353ce30f1789c9c7fe3"},
    {"p5_comments_spaces.pgm", 3, 2, 1, 255, "9ac939744dc23feb8171d6d037e9a4670e142f4696999a7e2401d36bd45626d7"},
    {"p5_maxval1.pgm", 8, 2, 1, 1, "14033deb1feff0ec445b0b4a470f9055aff185815a087f162234e2ac48f05ba6"},
    {"p5_payload_starts_with_space.pgm", 2, 1, 1, 255,
     "e16f1596201850fd4a63680b27f603cb64e67176159be3d8ed78a4403fdb1700"},
    {"p6_1x1_red.ppm", 1, 1, 3, 255, "7fa54a42524916a1648ec76ce75d295024840b7a3a4f4bbaf3e43155d0014767"},
    {"p6_4x4.ppm", 4, 4, 3, 255, "3bc1e6972e1d8b022d264a92ed1d5bac7fcd75083745942d83c4cdbdf9cbfc59"},
    {"p6_4x4_comment.ppm", 4, 4, 3, 255, "3bc1e6972e1d8b022d264a92ed1d5bac7fcd75083745942d83c4cdbdf9cbfc59"},
    {"p6_5x3_maxval15.ppm", 5, 3, 3, 15, "8500ef01bd4a8370b2c9f95d7de4a5831615c08dbe4db979fe854ba6f7b7d93c"},
};

inline const std::pair<const char*, simpack::Errc> kMalformedPnm[] = {
    {"bad_magic_p3.pnm", simpack::Errc::UnknownMagic},
    {"bad_maxval_16bit.pgm", simpack::Errc::UnsupportedMaxval},
    {"bad_truncated.ppm", simpack::Errc::TruncatedPayload},
    {"bad_trailing.pgm", simpack::Errc::TrailingGarbage},
    {"bad_header_missing_height.pgm", simpack::Errc::MalformedHeader},
    {"bad_sample_over_maxval.pgm", simpack::Errc::SampleExceedsMaxval},
};

}  // namespace fixtures
