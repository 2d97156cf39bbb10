#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "simpack/error.hpp"
#include "simpack/pnm.hpp"

namespace simpack {

/// Difference-of-Gaussians detector settings. Defaults follow the usual
/// SIFT constants.
struct ScaleSpaceParams {
  int octaves = 0;  // 0: keep halving until the short side drops below 16
  int scales_per_octave = 3;
  double base_sigma = 1.6;
  double contrast_threshold = 0.03;  // on intensities scaled to [0,1]
  double edge_ratio = 10.0;
  int border = 8;
  int max_dimension = 512;  // longer side is downscaled to this; 0 disables

  void validate() const {
    if (octaves < 0) throw Error(Errc::InvalidArgument, "octaves must be >= 1 (or 0 for auto)");
    if (scales_per_octave < 1) throw Error(Errc::InvalidArgument, "scales_per_octave must be >= 1");
    if (!(base_sigma > 0)) throw Error(Errc::InvalidArgument, "base_sigma must be > 0");
    if (!(contrast_threshold > 0)) throw Error(Errc::InvalidArgument, "contrast_threshold must be > 0");
    if (!(edge_ratio > 1)) throw Error(Errc::InvalidArgument, "edge_ratio must be > 1");
    if (border < 0) throw Error(Errc::InvalidArgument, "border must be >= 0");
    if (max_dimension != 0 && max_dimension < 32)
      throw Error(Errc::InvalidArgument, "max_dimension must be 0 or >= 32");
  }

  bool operator==(const ScaleSpaceParams&) const = default;
};

/// Detected keypoint in input-image pixel coordinates.
struct Keypoint {
  float x = 0;
  float y = 0;
  float sigma = 0;
  float orientation = 0;  // radians, [0, 2*pi)
  float response = 0;     // |DoG| at the refined extremum
  std::int32_t octave = 0;
  std::int32_t layer = 0;

  bool operator==(const Keypoint&) const = default;
};

inline constexpr std::size_t kDescriptorSize = 128;
using Descriptor = std::array<float, kDescriptorSize>;

struct FeatureSet {
  std::string image_id;
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;  // parallel to keypoints

  std::size_t size() const noexcept { return keypoints.size(); }
  bool operator==(const FeatureSet&) const = default;
};

struct MatchResult {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (index in a, index in b)
  std::size_t shared_count = 0;
};

namespace detail {

/// Single-channel float image.
struct Plane {
  int w = 0;
  int h = 0;
  std::vector<float> px;

  Plane() = default;
  Plane(int width, int height) : w(width), h(height), px(std::size_t(width) * height, 0.f) {}

  float at(int x, int y) const { return px[std::size_t(y) * w + x]; }
  float& at(int x, int y) { return px[std::size_t(y) * w + x]; }
  float clamped(int x, int y) const {
    return at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  }
};

inline std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<float> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (float& v : k) v = static_cast<float>(v / sum);
  return k;
}

/// Separable blur, edge samples replicated.
inline Plane gaussian_blur(const Plane& src, double sigma) {
  if (sigma <= 0) return src;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Plane tmp(src.w, src.h);
  for (int y = 0; y < src.h; ++y) {
    for (int x = 0; x < src.w; ++x) {
      float acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src.at(std::clamp(x + i, 0, src.w - 1), y);
      tmp.at(x, y) = acc;
    }
  }
  Plane out(src.w, src.h);
  for (int y = 0; y < src.h; ++y) {
    for (int x = 0; x < src.w; ++x) {
      float acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, std::clamp(y + i, 0, src.h - 1));
      out.at(x, y) = acc;
    }
  }
  return out;
}

inline Plane subsample2(const Plane& src) {
  Plane out(std::max(1, src.w / 2), std::max(1, src.h / 2));
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) out.at(x, y) = src.at(2 * x, 2 * y);
  return out;
}

inline Plane box_halve(const Plane& src) {
  Plane out(std::max(1, src.w / 2), std::max(1, src.h / 2));
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      out.at(x, y) = 0.25f * (src.clamped(2 * x, 2 * y) + src.clamped(2 * x + 1, 2 * y) +
                              src.clamped(2 * x, 2 * y + 1) + src.clamped(2 * x + 1, 2 * y + 1));
  return out;
}

inline Plane resize_bilinear(const Plane& src, int w, int h) {
  Plane out(w, h);
  const double sx = double(src.w) / w;
  const double sy = double(src.h) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int y0 = std::min(static_cast<int>(fy), src.h - 1);
    const int y1 = std::min(y0 + 1, src.h - 1);
    const float ty = static_cast<float>(fy - y0);
    for (int x = 0; x < w; ++x) {
      const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
      const int x0 = std::min(static_cast<int>(fx), src.w - 1);
      const int x1 = std::min(x0 + 1, src.w - 1);
      const float tx = static_cast<float>(fx - x0);
      const float top = src.at(x0, y0) * (1 - tx) + src.at(x1, y0) * tx;
      const float bot = src.at(x0, y1) * (1 - tx) + src.at(x1, y1) * tx;
      out.at(x, y) = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

/// Grayscale plane normalized to [0,1].
inline Plane to_plane(const RawImage& img) {
  RawImage gray = to_grayscale(img);
  Plane p(static_cast<int>(gray.width), static_cast<int>(gray.height));
  const float scale = 1.0f / static_cast<float>(gray.maxval);
  for (std::size_t i = 0; i < p.px.size(); ++i) p.px[i] = gray.pixels[i] * scale;
  return p;
}

inline float wrap_angle(double a) {
  constexpr double two_pi = 2 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a < 0) a += two_pi;
  float f = static_cast<float>(a);
  if (f >= static_cast<float>(two_pi)) f = 0.f;
  return f;
}

struct Pyramid {
  int octaves = 0;
  int scales = 0;
  std::vector<std::vector<Plane>> gauss;  // [octave][scales + 3]
  std::vector<std::vector<Plane>> dog;    // [octave][scales + 2]
};

inline int auto_octaves(int w, int h) {
  int n = 0;
  for (int m = std::min(w, h); m >= 16; m /= 2) ++n;
  return std::max(1, n);
}

inline Pyramid build_pyramid(const Plane& image, const ScaleSpaceParams& p) {
  Pyramid pyr;
  pyr.scales = p.scales_per_octave;
  const int fit = auto_octaves(image.w, image.h);
  pyr.octaves = p.octaves == 0 ? fit : std::min(p.octaves, fit);
  const int layers = pyr.scales + 3;
  const double k = std::pow(2.0, 1.0 / pyr.scales);

  std::vector<double> step(layers, 0.0);
  for (int i = 1; i < layers; ++i) {
    const double prev = p.base_sigma * std::pow(k, i - 1);
    const double total = prev * k;
    step[i] = std::sqrt(total * total - prev * prev);
  }

  // Input is assumed to carry a blur of 0.5 from the sensor.
  constexpr double kAssumedBlur = 0.5;
  const double initial =
      p.base_sigma > kAssumedBlur ? std::sqrt(p.base_sigma * p.base_sigma - kAssumedBlur * kAssumedBlur) : 0.0;

  pyr.gauss.resize(pyr.octaves);
  pyr.dog.resize(pyr.octaves);
  for (int o = 0; o < pyr.octaves; ++o) {
    auto& g = pyr.gauss[o];
    g.reserve(layers);
    if (o == 0)
      g.push_back(gaussian_blur(image, initial));
    else
      g.push_back(subsample2(pyr.gauss[o - 1][pyr.scales]));
    for (int i = 1; i < layers; ++i) g.push_back(gaussian_blur(g[i - 1], step[i]));

    auto& d = pyr.dog[o];
    d.reserve(layers - 1);
    for (int i = 0; i + 1 < layers; ++i) {
      Plane diff(g[i].w, g[i].h);
      for (std::size_t j = 0; j < diff.px.size(); ++j) diff.px[j] = g[i + 1].px[j] - g[i].px[j];
      d.push_back(std::move(diff));
    }
  }
  return pyr;
}

inline bool is_extremum(const std::vector<Plane>& dog, int s, int x, int y) {
  const float v = dog[s].at(x, y);
  const bool is_max = v > 0;
  for (int ds = -1; ds <= 1; ++ds) {
    const Plane& pl = dog[s + ds];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (ds == 0 && dx == 0 && dy == 0) continue;
        const float n = pl.at(x + dx, y + dy);
        if (is_max ? !(v > n) : !(v < n)) return false;
      }
    }
  }
  return true;
}

struct Refined {
  int x, y, s;
  double off_x, off_y, off_s;
  double contrast;
};

/// Quadratic fit of the DoG around (x, y, s); moves the sample point while the
/// offset exceeds half a pixel. Returns false for unstable or low-contrast
/// candidates and for edge responses.
inline bool refine_extremum(const std::vector<Plane>& dog, int scales, const ScaleSpaceParams& p,
                            int x, int y, int s, Refined& out) {
  constexpr int kMaxSteps = 5;
  const int w = dog[0].w;
  const int h = dog[0].h;
  double ox = 0, oy = 0, os = 0;
  double gx = 0, gy = 0, gs = 0;
  int step = 0;
  for (; step < kMaxSteps; ++step) {
    const Plane& prev = dog[s - 1];
    const Plane& cur = dog[s];
    const Plane& next = dog[s + 1];
    const double v2 = 2.0 * cur.at(x, y);
    gx = 0.5 * (cur.at(x + 1, y) - cur.at(x - 1, y));
    gy = 0.5 * (cur.at(x, y + 1) - cur.at(x, y - 1));
    gs = 0.5 * (next.at(x, y) - prev.at(x, y));
    const double dxx = cur.at(x + 1, y) + cur.at(x - 1, y) - v2;
    const double dyy = cur.at(x, y + 1) + cur.at(x, y - 1) - v2;
    const double dss = next.at(x, y) + prev.at(x, y) - v2;
    const double dxy = 0.25 * (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) - cur.at(x + 1, y - 1) +
                               cur.at(x - 1, y - 1));
    const double dxs = 0.25 * (next.at(x + 1, y) - next.at(x - 1, y) - prev.at(x + 1, y) + prev.at(x - 1, y));
    const double dys = 0.25 * (next.at(x, y + 1) - next.at(x, y - 1) - prev.at(x, y + 1) + prev.at(x, y - 1));

    // Solve H * off = -g by Cramer's rule.
    const double a = dxx, b = dxy, c = dxs, d = dyy, e = dys, f = dss;
    const double det = a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c);
    if (std::abs(det) < 1e-12) return false;
    const double rx = -gx, ry = -gy, rs = -gs;
    ox = (rx * (d * f - e * e) - b * (ry * f - e * rs) + c * (ry * e - d * rs)) / det;
    oy = (a * (ry * f - e * rs) - rx * (b * f - e * c) + c * (b * rs - ry * c)) / det;
    os = (a * (d * rs - ry * e) - b * (b * rs - ry * c) + rx * (b * e - d * c)) / det;

    if (std::abs(ox) < 0.5 && std::abs(oy) < 0.5 && std::abs(os) < 0.5) break;
    if (std::abs(ox) > 1e3 || std::abs(oy) > 1e3 || std::abs(os) > 1e3) return false;
    x += static_cast<int>(std::lround(ox));
    y += static_cast<int>(std::lround(oy));
    s += static_cast<int>(std::lround(os));
    if (s < 1 || s > scales || x < 1 || x >= w - 1 || y < 1 || y >= h - 1) return false;
  }
  if (step == kMaxSteps) return false;

  const double contrast = dog[s].at(x, y) + 0.5 * (gx * ox + gy * oy + gs * os);
  if (std::abs(contrast) < p.contrast_threshold) return false;

  const Plane& cur = dog[s];
  const double v2 = 2.0 * cur.at(x, y);
  const double dxx = cur.at(x + 1, y) + cur.at(x - 1, y) - v2;
  const double dyy = cur.at(x, y + 1) + cur.at(x, y - 1) - v2;
  const double dxy =
      0.25 * (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) - cur.at(x + 1, y - 1) + cur.at(x - 1, y - 1));
  const double tr = dxx + dyy;
  const double det = dxx * dyy - dxy * dxy;
  const double r = p.edge_ratio;
  if (det <= 0 || tr * tr * r >= (r + 1) * (r + 1) * det) return false;

  out = Refined{x, y, s, ox, oy, os, contrast};
  return true;
}

/// Dominant gradient orientations around a keypoint: 36-bin histogram,
/// every local peak within 80% of the maximum.
inline std::vector<float> dominant_orientations(const Plane& img, int cx, int cy, double scale) {
  constexpr int kBins = 36;
  constexpr double two_pi = 2 * std::numbers::pi;
  const double sigma = 1.5 * scale;
  const int radius = static_cast<int>(std::lround(3.0 * sigma));
  std::array<double, kBins> hist{};
  for (int dy = -radius; dy <= radius; ++dy) {
    const int y = cy + dy;
    if (y <= 0 || y >= img.h - 1) continue;
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = cx + dx;
      if (x <= 0 || x >= img.w - 1) continue;
      const double gx = img.at(x + 1, y) - img.at(x - 1, y);
      const double gy = img.at(x, y + 1) - img.at(x, y - 1);
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0) continue;
      double ang = std::atan2(gy, gx);
      if (ang < 0) ang += two_pi;
      const double weight = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      int bin = static_cast<int>(std::lround(ang * kBins / two_pi)) % kBins;
      hist[bin] += weight * mag;
    }
  }
  for (int iter = 0; iter < 6; ++iter) {
    std::array<double, kBins> smoothed{};
    for (int b = 0; b < kBins; ++b)
      smoothed[b] = (hist[(b + kBins - 1) % kBins] + hist[b] + hist[(b + 1) % kBins]) / 3.0;
    hist = smoothed;
  }
  const double peak = *std::max_element(hist.begin(), hist.end());
  std::vector<float> out;
  if (peak <= 0) return out;
  for (int b = 0; b < kBins; ++b) {
    const double l = hist[(b + kBins - 1) % kBins];
    const double c = hist[b];
    const double r = hist[(b + 1) % kBins];
    if (c > l && c > r && c >= 0.8 * peak) {
      const double denom = l - 2 * c + r;
      const double offset = denom != 0 ? 0.5 * (l - r) / denom : 0.0;
      out.push_back(wrap_angle(two_pi * (b + offset) / kBins));
    }
  }
  return out;
}

/// 4x4 spatial cells x 8 orientation bins with trilinear interpolation,
/// normalized and clamped at 0.2. Returns false when the patch carries no
/// usable gradient energy.
inline bool compute_descriptor(const Plane& img, double kx, double ky, double scale, double orientation,
                               Descriptor& out) {
  constexpr int kCells = 4;
  constexpr int kOriBins = 8;
  constexpr double kMagnification = 3.0;
  constexpr double kClamp = 0.2;
  constexpr double two_pi = 2 * std::numbers::pi;

  const double cell = kMagnification * scale;
  const int radius = static_cast<int>(std::lround(cell * std::numbers::sqrt2 * (kCells + 1) * 0.5));
  const double cos_t = std::cos(orientation);
  const double sin_t = std::sin(orientation);
  const int cx = static_cast<int>(std::lround(kx));
  const int cy = static_cast<int>(std::lround(ky));
  // Gaussian window with sigma of half the descriptor width, in cell units.
  const double win = 0.5 * kCells;
  const double exp_scale = -1.0 / (2 * win * win);

  std::array<double, kCells * kCells * kOriBins> hist{};
  for (int dy = -radius; dy <= radius; ++dy) {
    const int y = cy + dy;
    if (y <= 0 || y >= img.h - 1) continue;
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = cx + dx;
      if (x <= 0 || x >= img.w - 1) continue;
      const double ox = x - kx;
      const double oy = y - ky;
      // Rotate into the keypoint frame, in cell units.
      const double c_rot = (ox * cos_t + oy * sin_t) / cell;
      const double r_rot = (-ox * sin_t + oy * cos_t) / cell;
      const double cbin = c_rot + kCells / 2.0 - 0.5;
      const double rbin = r_rot + kCells / 2.0 - 0.5;
      if (cbin <= -1 || cbin >= kCells || rbin <= -1 || rbin >= kCells) continue;

      const double gx = img.at(x + 1, y) - img.at(x - 1, y);
      const double gy = img.at(x, y + 1) - img.at(x, y - 1);
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0) continue;
      double ang = std::atan2(gy, gx) - orientation;
      ang = std::fmod(ang, two_pi);
      if (ang < 0) ang += two_pi;
      const double obin = ang * kOriBins / two_pi;
      const double weight = mag * std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);

      const int r0 = static_cast<int>(std::floor(rbin));
      const int c0 = static_cast<int>(std::floor(cbin));
      const int o0 = static_cast<int>(std::floor(obin));
      const double fr = rbin - r0, fc = cbin - c0, fo = obin - o0;
      for (int i = 0; i < 2; ++i) {
        const int ri = r0 + i;
        if (ri < 0 || ri >= kCells) continue;
        const double wr = i ? fr : 1 - fr;
        for (int j = 0; j < 2; ++j) {
          const int ci = c0 + j;
          if (ci < 0 || ci >= kCells) continue;
          const double wc = j ? fc : 1 - fc;
          for (int k = 0; k < 2; ++k) {
            const int oi = (o0 + k) % kOriBins;
            const double wo = k ? fo : 1 - fo;
            hist[(ri * kCells + ci) * kOriBins + oi] += weight * wr * wc * wo;
          }
        }
      }
    }
  }

  auto normalize = [&] {
    double norm = 0;
    for (double v : hist) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 1e-12)) return false;
    for (double& v : hist) v /= norm;
    return true;
  };
  if (!normalize()) return false;
  // Clamp and renormalize until no component exceeds the clamp; needs at
  // least 25 non-zero bins to converge.
  bool settled = false;
  for (int iter = 0; iter < 16 && !settled; ++iter) {
    settled = true;
    for (double& v : hist) {
      if (v > kClamp) {
        v = kClamp;
        settled = false;
      }
    }
    if (!settled && !normalize()) return false;
  }
  if (!settled) {
    double hi = *std::max_element(hist.begin(), hist.end());
    if (hi > kClamp + 1e-4) return false;
  }
  for (std::size_t i = 0; i < hist.size(); ++i) out[i] = static_cast<float>(hist[i]);
  return true;
}

}  // namespace detail

/// Detects DoG extrema and builds one 128-d descriptor per dominant
/// orientation. Deterministic for fixed input and parameters.
inline FeatureSet extract_features(const RawImage& img, const ScaleSpaceParams& p = {},
                                   std::string image_id = {}) {
  p.validate();
  if (std::min(img.width, img.height) < 32)
    throw Error(Errc::ImageTooSmall, std::to_string(img.width) + "x" + std::to_string(img.height) +
                                         " is below the 32 pixel minimum");

  detail::Plane plane = detail::to_plane(img);
  double to_input = 1.0;  // processed pixel -> input pixel
  const int longest = std::max(plane.w, plane.h);
  if (p.max_dimension > 0 && longest > p.max_dimension) {
    while (std::max(plane.w, plane.h) >= 2 * p.max_dimension) plane = detail::box_halve(plane);
    const double f = double(p.max_dimension) / std::max(plane.w, plane.h);
    const int w = std::max(1, static_cast<int>(std::lround(plane.w * f)));
    const int h = std::max(1, static_cast<int>(std::lround(plane.h * f)));
    plane = detail::resize_bilinear(plane, w, h);
    to_input = double(img.width) / w;
  }

  const detail::Pyramid pyr = detail::build_pyramid(plane, p);
  const int S = pyr.scales;
  const double pre_threshold = 0.5 * p.contrast_threshold / S;

  FeatureSet fs;
  fs.image_id = std::move(image_id);

  for (int o = 0; o < pyr.octaves; ++o) {
    const auto& dog = pyr.dog[o];
    const int w = dog[0].w;
    const int h = dog[0].h;
    if (w < 3 || h < 3) continue;
    const double octave_scale = std::ldexp(1.0, o);
    std::set<std::tuple<int, int, int>> seen;

    for (int s = 1; s <= S; ++s) {
      for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
          const float v = dog[s].at(x, y);
          if (std::abs(v) <= pre_threshold) continue;
          if (!detail::is_extremum(dog, s, x, y)) continue;
          detail::Refined r;
          if (!detail::refine_extremum(dog, S, p, x, y, s, r)) continue;
          if (!seen.insert({r.x, r.y, r.s}).second) continue;

          const double base_x = (r.x + r.off_x) * octave_scale;
          const double base_y = (r.y + r.off_y) * octave_scale;
          if (base_x < p.border || base_x >= plane.w - p.border || base_y < p.border ||
              base_y >= plane.h - p.border)
            continue;

          const double oct_sigma = p.base_sigma * std::pow(2.0, (r.s + r.off_s) / S);
          const detail::Plane& gimg = pyr.gauss[o][r.s];
          const auto orientations = detail::dominant_orientations(gimg, r.x, r.y, oct_sigma);
          for (float ori : orientations) {
            Descriptor desc;
            if (!detail::compute_descriptor(gimg, r.x + r.off_x, r.y + r.off_y, oct_sigma, ori, desc))
              continue;
            Keypoint kp;
            kp.x = static_cast<float>(base_x * to_input);
            kp.y = static_cast<float>(base_y * to_input);
            kp.sigma = static_cast<float>(oct_sigma * octave_scale * to_input);
            kp.orientation = ori;
            kp.response = static_cast<float>(std::abs(r.contrast));
            kp.octave = o;
            kp.layer = r.s;
            fs.keypoints.push_back(kp);
            fs.descriptors.push_back(desc);
          }
        }
      }
    }
  }
  return fs;
}

/// Euclidean distance accumulated in double, components in index order.
inline double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  double acc = 0;
  for (std::size_t k = 0; k < kDescriptorSize; ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

namespace detail {

struct Nearest {
  std::uint32_t index = 0;
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();

  bool passes(double ratio) const { return std::isfinite(second) && best < ratio * second; }
};

}  // namespace detail

/// Exhaustive nearest-neighbour matching with the distance-ratio test. A pair
/// (i, j) survives when j is the nearest descriptor to a[i] and beats the
/// runner-up by `ratio`; with `two_sided` the same must hold from b to a.
/// Ties on distance go to the lower index.
inline MatchResult match_features(const FeatureSet& a, const FeatureSet& b, double ratio = 0.6,
                                  bool two_sided = true) {
  if (!(ratio > 0 && ratio < 1)) throw Error(Errc::InvalidArgument, "ratio must be in (0,1)");
  MatchResult result;
  const std::size_t na = a.descriptors.size();
  const std::size_t nb = b.descriptors.size();
  if (na == 0 || nb == 0) return result;

  std::vector<detail::Nearest> ab(na), ba(nb);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double d = descriptor_distance(a.descriptors[i], b.descriptors[j]);
      auto update = [d](detail::Nearest& n, std::size_t idx) {
        if (d < n.best) {
          n.second = n.best;
          n.best = d;
          n.index = static_cast<std::uint32_t>(idx);
        } else if (d < n.second) {
          n.second = d;
        }
      };
      update(ab[i], j);
      update(ba[j], i);
    }
  }

  if (two_sided) {
    for (std::size_t i = 0; i < na; ++i) {
      if (!ab[i].passes(ratio)) continue;
      const std::uint32_t j = ab[i].index;
      if (ba[j].passes(ratio) && ba[j].index == i) result.pairs.emplace_back(static_cast<std::uint32_t>(i), j);
    }
  } else {
    // Keep the closest a-side candidate per b index so the result stays one-to-one.
    std::vector<std::int64_t> owner(nb, -1);
    for (std::size_t i = 0; i < na; ++i) {
      if (!ab[i].passes(ratio)) continue;
      std::int64_t& o = owner[ab[i].index];
      if (o < 0 || ab[i].best < ab[static_cast<std::size_t>(o)].best) o = static_cast<std::int64_t>(i);
    }
    for (std::size_t i = 0; i < na; ++i)
      if (ab[i].passes(ratio) && owner[ab[i].index] == static_cast<std::int64_t>(i))
        result.pairs.emplace_back(static_cast<std::uint32_t>(i), ab[i].index);
  }
  result.shared_count = result.pairs.size();
  return result;
}

}  // namespace simpack
