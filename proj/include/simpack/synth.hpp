#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "simpack/bytes.hpp"
#include "simpack/error.hpp"
#include "simpack/manifest.hpp"
#include "simpack/pnm.hpp"
#include "simpack/rng.hpp"

namespace simpack {

enum Perturbation : std::uint32_t {
  kBrightnessShift = 1u << 0,  // up to +-10 levels
  kTranslation = 1u << 1,      // up to 5% of each side
  kGaussianNoise = 1u << 2,    // sigma 2 levels
  kRescale = 1u << 3,          // factor in [0.9, 1.1]
  kAllPerturbations = kBrightnessShift | kTranslation | kGaussianNoise | kRescale,
};

/// Desk-scale stand-in for a tagged photo collection: `n_bases` procedural
/// scenes, each seen through `variants_per_base` perturbed copies, plus
/// `n_unrelated` one-off scenes tagged "random". The last `off_topic` share
/// of each tag's variants shows a scene of its own, like loosely tagged
/// photos at the bottom of a relevance ranking.
struct SynthParams {
  std::uint64_t seed = 2016;
  std::uint32_t n_bases = 12;
  std::uint32_t variants_per_base = 10;
  std::uint32_t width = 256;
  std::uint32_t height = 256;
  std::uint32_t perturbations = kAllPerturbations;
  std::uint32_t n_unrelated = 20;
  double off_topic = 0.2;

  void validate() const {
    if (n_bases < 1) throw Error(Errc::InvalidArgument, "n_bases must be >= 1");
    if (variants_per_base < 1) throw Error(Errc::InvalidArgument, "variants_per_base must be >= 1");
    if (width < 64 || height < 64) throw Error(Errc::InvalidArgument, "synthetic images must be >= 64x64");
    if (perturbations & ~std::uint32_t{kAllPerturbations})
      throw Error(Errc::InvalidArgument, "unknown perturbation bits");
    if (!(off_topic >= 0 && off_topic < 1)) throw Error(Errc::InvalidArgument, "off_topic must be in [0, 1)");
  }

  bool operator==(const SynthParams&) const = default;
};

inline constexpr const char* kRandomTag = "random";

namespace detail {

struct Rgb {
  double r, g, b;
};

inline Rgb random_color(Rng& rng) { return {rng.uniform(0, 255), rng.uniform(0, 255), rng.uniform(0, 255)}; }

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

/// Gradient background, flat and striped shapes, speckle texture.
inline RawImage render_scene(std::uint32_t w, std::uint32_t h, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> px(std::size_t{w} * h * 3);
  auto put = [&](std::uint32_t x, std::uint32_t y, const Rgb& c) {
    double* p = &px[(std::size_t{y} * w + x) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  };

  const Rgb c0 = random_color(rng);
  const Rgb c1 = random_color(rng);
  const double angle = rng.uniform(0, 2 * std::numbers::pi);
  const double gx = std::cos(angle), gy = std::sin(angle);
  const double span = std::abs(gx) * w + std::abs(gy) * h;
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      double t = ((x * gx + y * gy) / span) + 0.5;
      t = std::clamp(std::round(t * 32) / 32, 0.0, 1.0);  // banded
      put(x, y, {c0.r + (c1.r - c0.r) * t, c0.g + (c1.g - c0.g) * t, c0.b + (c1.b - c0.b) * t});
    }
  }

  const int shapes = static_cast<int>(rng.range(26, 36));
  for (int s = 0; s < shapes; ++s) {
    const int kind = static_cast<int>(rng.below(3));
    const double cx = rng.uniform(0, w), cy = rng.uniform(0, h);
    const double rx = rng.uniform(0.03, 0.12) * w, ry = rng.uniform(0.03, 0.12) * h;
    const Rgb fill = random_color(rng);
    const Rgb alt = random_color(rng);
    const bool striped = rng.below(3) == 0;
    const double stripe = rng.uniform(3, 9);
    const double rot = rng.uniform(0, std::numbers::pi);
    const double cr = std::cos(rot), sr = std::sin(rot);
    const int x0 = std::max(0, static_cast<int>(cx - rx - ry - 1));
    const int x1 = std::min(static_cast<int>(w) - 1, static_cast<int>(cx + rx + ry + 1));
    const int y0 = std::max(0, static_cast<int>(cy - rx - ry - 1));
    const int y1 = std::min(static_cast<int>(h) - 1, static_cast<int>(cy + rx + ry + 1));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = (dx * cr + dy * sr) / rx;
        const double v = (-dx * sr + dy * cr) / ry;
        bool inside = false;
        switch (kind) {
          case 0: inside = u * u + v * v <= 1; break;
          case 1: inside = std::abs(u) <= 1 && std::abs(v) <= 1; break;
          default: inside = v >= -1 && v <= 1 && std::abs(u) <= (1 - v) / 2; break;
        }
        if (!inside) continue;
        const bool use_alt = striped && static_cast<int>(std::floor((u * rx) / stripe)) % 2 == 0;
        put(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y), use_alt ? alt : fill);
      }
    }
  }

  // Film grain over textured shapes' bounding boxes keeps single images from
  // compressing to nothing.
  const int grain_patches = static_cast<int>(rng.range(3, 6));
  for (int g = 0; g < grain_patches; ++g) {
    const auto gw = static_cast<std::uint32_t>(rng.uniform(0.2, 0.5) * w);
    const auto gh = static_cast<std::uint32_t>(rng.uniform(0.2, 0.5) * h);
    const auto gx0 = static_cast<std::uint32_t>(rng.below(w - gw + 1));
    const auto gy0 = static_cast<std::uint32_t>(rng.below(h - gh + 1));
    for (std::uint32_t y = gy0; y < gy0 + gh; ++y)
      for (std::uint32_t x = gx0; x < gx0 + gw; ++x) {
        double* p = &px[(std::size_t{y} * w + x) * 3];
        const double delta = rng.uniform(-6, 6);
        for (int c = 0; c < 3; ++c) p[c] += delta;
      }
  }

  // Speckle: sparse bright/dark dots that give small-scale detail.
  const std::size_t dots = std::size_t{w} * h / 90;
  for (std::size_t d = 0; d < dots; ++d) {
    const auto x = static_cast<std::uint32_t>(rng.below(w));
    const auto y = static_cast<std::uint32_t>(rng.below(h));
    const double delta = rng.uniform(-60, 60);
    double* p = &px[(std::size_t{y} * w + x) * 3];
    for (int c = 0; c < 3; ++c) p[c] += delta;
  }

  RawImage img;
  img.width = w;
  img.height = h;
  img.channels = 3;
  img.maxval = 255;
  img.pixels.resize(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) img.pixels[i] = to_byte(px[i]);
  return img;
}

/// Applies the enabled perturbations at `strength` in [0, 1]. Geometry first
/// (rescale, then translation; nearest-neighbour with edge replication),
/// then photometric changes.
inline RawImage perturb(const RawImage& base, double strength, std::uint32_t which, std::uint64_t seed) {
  Rng rng(seed);
  const int w = static_cast<int>(base.width);
  const int h = static_cast<int>(base.height);
  const double scale = (which & kRescale) ? 1.0 + 0.1 * strength * rng.uniform(-1, 1) : 1.0;
  const int max_dx = static_cast<int>(std::lround(0.05 * strength * w));
  const int max_dy = static_cast<int>(std::lround(0.05 * strength * h));
  const int dx = (which & kTranslation) ? static_cast<int>(rng.range(-max_dx, max_dx)) : 0;
  const int dy = (which & kTranslation) ? static_cast<int>(rng.range(-max_dy, max_dy)) : 0;
  const double shift = (which & kBrightnessShift) ? std::round(10.0 * strength * rng.uniform(-1, 1)) : 0.0;

  // Photometric changes cover a band of rows whose height grows with strength.
  auto band = [&](double fraction) {
    const int rows = static_cast<int>(std::lround(fraction * h));
    const int top = rows < h ? static_cast<int>(rng.below(static_cast<std::uint64_t>(h - rows + 1))) : 0;
    return std::pair{top, top + rows};
  };
  const auto [b0, b1] = band(strength / 3);
  const auto [n0, n1] = (which & kGaussianNoise) ? band(strength / 8) : std::pair{0, 0};

  RawImage out = base;
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = (x - dx - cx) / scale + cx;
      const double sy = (y - dy - cy) / scale + cy;
      const int ix = std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0, w - 1);
      const int iy = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0, h - 1);
      for (int c = 0; c < 3; ++c)
        out.pixels[(std::size_t(y) * w + x) * 3 + c] = base.pixels[(std::size_t(iy) * w + ix) * 3 + c];
    }
  }
  if (shift != 0)
    for (int y = b0; y < b1; ++y)
      for (int k = 0; k < w * 3; ++k) {
        auto& v = out.pixels[std::size_t(y) * w * 3 + k];
        v = to_byte(double(v) + shift);
      }
  for (int y = n0; y < n1; ++y)
    for (int k = 0; k < w * 3; ++k) {
      auto& v = out.pixels[std::size_t(y) * w * 3 + k];
      v = to_byte(double(v) + 2.0 * rng.normal());
    }
  return out;
}

inline std::string two_digits(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02u", v);
  return buf;
}

}  // namespace detail

/// Perturbation strength of the rank-th variant (1-based) out of `count`:
/// 0 for rank 1 rising linearly to 1 for the last rank.
inline double variant_strength(std::uint32_t rank, std::uint32_t count) {
  return count <= 1 ? 0.0 : double(rank - 1) / double(count - 1);
}

/// Number of variants per tag that show an unrelated scene.
inline std::uint32_t off_topic_count(const SynthParams& p) {
  return static_cast<std::uint32_t>(std::floor(p.off_topic * p.variants_per_base + 1e-9));
}

inline bool is_off_topic(const SynthParams& p, std::uint32_t rank) {
  return rank > p.variants_per_base - off_topic_count(p);
}

/// Unperturbed scene behind variant `rank` of base `b` (both 1-based).
inline RawImage variant_source(const SynthParams& p, std::uint32_t b, std::uint32_t rank) {
  const std::uint64_t salt = is_off_topic(p, rank) ? 300000 + 1000 * std::uint64_t{b} + rank : b;
  return detail::render_scene(p.width, p.height, mix_seed(p.seed, salt));
}

/// Variant `rank` of base `b` exactly as synth_corpus writes it.
inline RawImage render_variant(const SynthParams& p, std::uint32_t b, std::uint32_t rank) {
  return detail::perturb(variant_source(p, b, rank), variant_strength(rank, p.variants_per_base), p.perturbations,
                         mix_seed(p.seed, 1000 * std::uint64_t{b} + rank));
}

/// Writes the corpus as P6 files under `dir` plus `dir/manifest.json`.
/// Tags are "scene01".."sceneNN" with rank = variant index, and "random"
/// for the unrelated scenes. Byte-identical for a fixed seed.
inline Manifest synth_corpus(const SynthParams& p, const std::filesystem::path& dir) {
  p.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  Manifest m;
  m.base_dir = dir;
  auto emit = [&](const RawImage& img, const std::string& id, const std::string& tag, std::uint32_t rank) {
    const Bytes file = write_pnm(img);
    const std::string name = id + ".pnm";
    write_file(dir / name, file);
    m.entries.push_back({name, id, {tag}, rank, file.size()});
  };

  for (std::uint32_t b = 1; b <= p.n_bases; ++b) {
    const RawImage base = detail::render_scene(p.width, p.height, mix_seed(p.seed, b));
    const std::string tag = "scene" + detail::two_digits(b);
    for (std::uint32_t v = 1; v <= p.variants_per_base; ++v) {
      const double s = variant_strength(v, p.variants_per_base);
      const RawImage img = detail::perturb(is_off_topic(p, v) ? variant_source(p, b, v) : base, s, p.perturbations,
                                           mix_seed(p.seed, 1000 * b + v));
      emit(img, "s" + detail::two_digits(b) + "v" + detail::two_digits(v), tag, v);
    }
  }
  for (std::uint32_t r = 1; r <= p.n_unrelated; ++r) {
    // Same perturbation spread as the tagged variants, different scene each time.
    const RawImage scene = detail::render_scene(p.width, p.height, mix_seed(p.seed, 500000 + r));
    const double s = variant_strength((r - 1) % p.variants_per_base + 1, p.variants_per_base);
    const RawImage img = detail::perturb(scene, s, p.perturbations, mix_seed(p.seed, 700000 + r));
    emit(img, "u" + detail::two_digits(r), kRandomTag, r);
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace simpack
