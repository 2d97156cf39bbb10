#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "fixtures.hpp"
#include "simpack/feature_cache.hpp"
#include "simpack/features.hpp"
#include "simpack/rng.hpp"

using namespace simpack;

namespace {

RawImage flat(std::uint32_t w, std::uint32_t h, std::uint8_t v) {
  return RawImage{w, h, 1, 255, Bytes(std::size_t{w} * h, v)};
}

RawImage blob(int size, double cx, double cy, double sigma) {
  RawImage img = flat(static_cast<std::uint32_t>(size), static_cast<std::uint32_t>(size), 0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      img.pixels[std::size_t(y) * size + x] =
          static_cast<std::uint8_t>(std::lround(60 + 150 * std::exp(-d2 / (2 * sigma * sigma))));
    }
  return img;
}

// Full-resolution Gaussian scale stack in double precision, truncated at 5
// sigma with replicated edges. Written independently of the library's blur.
std::vector<double> blur_oracle(const std::vector<double>& src, int w, int h, double sigma) {
  const int r = static_cast<int>(std::ceil(5 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-(i * i) / (2 * sigma * sigma));
  for (auto& v : k) v /= sum;
  std::vector<double> tmp(src.size()), out(src.size());
  auto at = [&](const std::vector<double>& p, int x, int y) {
    return p[std::size_t(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double a = 0;
      for (int i = -r; i <= r; ++i) a += k[i + r] * at(src, x + i, y);
      tmp[std::size_t(y) * w + x] = a;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double a = 0;
      for (int i = -r; i <= r; ++i) a += k[i + r] * at(tmp, x, y + i);
      out[std::size_t(y) * w + x] = a;
    }
  return out;
}

// Exhaustive two-sided ratio-test matcher.
std::set<std::pair<std::uint32_t, std::uint32_t>> match_oracle(const FeatureSet& a, const FeatureSet& b,
                                                               double ratio) {
  auto dist = [](const Descriptor& p, const Descriptor& q) {
    double s = 0;
    for (std::size_t k = 0; k < kDescriptorSize; ++k) s += (double(p[k]) - q[k]) * (double(p[k]) - q[k]);
    return std::sqrt(s);
  };
  auto best_of = [&](const std::vector<Descriptor>& from, const std::vector<Descriptor>& to, std::size_t i,
                     std::int64_t& idx) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < to.size(); ++j) d.emplace_back(dist(from[i], to[j]), j);
    std::sort(d.begin(), d.end());
    idx = -1;
    if (d.size() >= 2 && d[0].first < ratio * d[1].first) idx = static_cast<std::int64_t>(d[0].second);
  };
  std::set<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::size_t i = 0; i < a.descriptors.size(); ++i) {
    std::int64_t j = -1, back = -1;
    best_of(a.descriptors, b.descriptors, i, j);
    if (j < 0) continue;
    best_of(b.descriptors, a.descriptors, static_cast<std::size_t>(j), back);
    if (back == static_cast<std::int64_t>(i)) out.emplace(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
  }
  return out;
}

FeatureSet random_descriptors(std::size_t n, std::uint64_t seed, const FeatureSet* near = nullptr) {
  Rng rng(seed);
  FeatureSet fs;
  for (std::size_t i = 0; i < n; ++i) {
    Descriptor d{};
    double norm = 0;
    for (std::size_t k = 0; k < kDescriptorSize; ++k) {
      double v = rng.uniform();
      if (near && i < near->size()) v = near->descriptors[i][k] + 0.02 * rng.uniform();
      d[k] = static_cast<float>(v);
      norm += v * v;
    }
    for (auto& v : d) v = static_cast<float>(v / std::sqrt(norm));
    fs.keypoints.push_back({});
    fs.descriptors.push_back(d);
  }
  return fs;
}

void expect_invariants(const FeatureSet& fs, const RawImage& img, const ScaleSpaceParams& p = {}) {
  ASSERT_EQ(fs.keypoints.size(), fs.descriptors.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const Keypoint& k = fs.keypoints[i];
    EXPECT_GE(k.x, p.border);
    EXPECT_LT(k.x, float(img.width) - p.border);
    EXPECT_GE(k.y, p.border);
    EXPECT_LT(k.y, float(img.height) - p.border);
    EXPECT_GT(k.sigma, 0);
    EXPECT_GE(k.orientation, 0);
    EXPECT_LT(k.orientation, 2 * std::numbers::pi);
    double norm = 0;
    for (float v : fs.descriptors[i]) {
      EXPECT_GE(v, 0);
      EXPECT_LE(v, 0.2 + 1e-3);
      norm += double(v) * v;
    }
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-3);
  }
}

}  // namespace

TEST(Features, ConstantImageHasNoKeypoints) {
  for (std::uint8_t v : {0, 77, 255}) EXPECT_EQ(extract_features(flat(96, 80, v)).size(), 0u);
}

TEST(Features, TooSmallImageRejected) {
  try {
    extract_features(flat(31, 64, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ImageTooSmall);
  }
  EXPECT_NO_THROW(extract_features(flat(32, 32, 3)));
}

TEST(Features, InvalidParamsRejected) {
  ScaleSpaceParams p;
  p.scales_per_octave = 0;
  EXPECT_THROW(extract_features(flat(64, 64, 1), p), Error);
  p = {};
  p.edge_ratio = 1;
  EXPECT_THROW(extract_features(flat(64, 64, 1), p), Error);
  p = {};
  p.contrast_threshold = 0;
  EXPECT_THROW(extract_features(flat(64, 64, 1), p), Error);
}

TEST(Features, GaussianBlobFoundAtBruteForceExtremum) {
  const int size = 64;
  const double c = 32;
  const RawImage img = blob(size, c, c, 4.0);

  // Scan |DoG| over a dense full-resolution scale stack.
  std::vector<double> src(img.pixels.begin(), img.pixels.end());
  for (auto& v : src) v /= 255.0;
  std::vector<std::vector<double>> stack;
  for (int j = 0; j <= 10; ++j) {
    const double sigma = 1.6 * std::pow(2.0, j / 3.0);
    stack.push_back(blur_oracle(src, size, size, std::sqrt(sigma * sigma - 0.25)));
  }
  double best = 0;
  int bx = -1, by = -1;
  for (std::size_t j = 0; j + 1 < stack.size(); ++j)
    for (int y = 8; y < size - 8; ++y)
      for (int x = 8; x < size - 8; ++x) {
        const double d = std::abs(stack[j + 1][std::size_t(y) * size + x] - stack[j][std::size_t(y) * size + x]);
        if (d > best) {
          best = d;
          bx = x;
          by = y;
        }
      }
  ASSERT_LE(std::hypot(bx - c, by - c), 1.5) << bx << "," << by;

  const FeatureSet fs = extract_features(img);
  expect_invariants(fs, img);
  bool found = false;
  for (const auto& k : fs.keypoints) found = found || std::hypot(k.x - bx, k.y - by) <= 1.5;
  EXPECT_TRUE(found) << fs.size() << " keypoints, none near the blob";
}

TEST(Features, InvariantsOnTexturedImages) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const RawImage img = fixtures::textured(200, 160, seed);
    const FeatureSet fs = extract_features(img);
    EXPECT_GE(fs.size(), 20u);
    expect_invariants(fs, img);
  }
}

TEST(Features, RgbUsesLuma) {
  RawImage rgb{96, 96, 3, 255, {}};
  const RawImage gray = fixtures::textured(96, 96, 9);
  for (std::uint8_t v : gray.pixels) rgb.pixels.insert(rgb.pixels.end(), {v, v, v});
  EXPECT_EQ(extract_features(rgb), extract_features(gray));
}

TEST(Features, Deterministic) {
  const RawImage img = fixtures::textured(256, 256, 4);
  const FeatureSet a = extract_features(img, {}, "x");
  const FeatureSet b = extract_features(img, {}, "x");
  EXPECT_EQ(encode_feature_set(a), encode_feature_set(b));
}

TEST(Features, SelfMatchKeepsNearlyAll) {
  const FeatureSet a = extract_features(fixtures::textured(256, 256, 5));
  ASSERT_GE(a.size(), 20u);
  const MatchResult m = match_features(a, a);
  EXPECT_GE(double(m.shared_count), 0.9 * double(a.size()));
}

TEST(Features, RotationRepeatability) {
  const RawImage img = fixtures::textured(256, 256, 6);
  const RawImage rot = fixtures::rotate90(img);
  const FeatureSet a = extract_features(img);
  const FeatureSet b = extract_features(rot);
  ASSERT_GE(a.size(), 20u);
  std::size_t repeated = 0;
  for (const auto& k : a.keypoints) {
    const double rx = double(img.height) - 1 - k.y, ry = k.x;
    bool hit = false;
    for (const auto& q : b.keypoints) hit = hit || std::hypot(q.x - rx, q.y - ry) <= 2.0;
    repeated += hit;
  }
  EXPECT_GE(double(repeated), 0.5 * double(a.size())) << repeated << " of " << a.size();
}

TEST(Features, IndependentNoiseSharesFewFeatures) {
  const FeatureSet a = extract_features(fixtures::noise(256, 256, 101));
  const FeatureSet b = extract_features(fixtures::noise(256, 256, 202));
  const std::size_t shared = match_features(a, b).shared_count;
  EXPECT_LT(shared, 10u);
  EXPECT_EQ(shared, 0u);  // recorded for the seeded pair
}

TEST(Features, DownscalesLargeInputs) {
  const RawImage big = fixtures::textured(800, 600, 7);
  const FeatureSet fs = extract_features(big);
  expect_invariants(fs, big);
  ScaleSpaceParams off;
  off.max_dimension = 0;
  const FeatureSet full = extract_features(big, off);
  EXPECT_GT(full.size(), 0u);
  EXPECT_NE(fs.size(), full.size());
}

TEST(Matching, EmptySides) {
  const FeatureSet a = extract_features(fixtures::textured(96, 96, 1));
  EXPECT_EQ(match_features(FeatureSet{}, a).shared_count, 0u);
  EXPECT_EQ(match_features(a, FeatureSet{}).shared_count, 0u);
}

TEST(Matching, RatioMustBeOpenUnitInterval) {
  EXPECT_THROW(match_features({}, {}, 0.0), Error);
  EXPECT_THROW(match_features({}, {}, 1.0), Error);
}

TEST(Matching, AgreesWithExhaustiveOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FeatureSet a = random_descriptors(40 + seed * 8, seed);
    const FeatureSet b = random_descriptors(30 + seed * 5, 1000 + seed, &a);
    for (double ratio : {0.3, 0.6, 0.8}) {
      const MatchResult m = match_features(a, b, ratio);
      const std::set<std::pair<std::uint32_t, std::uint32_t>> got(m.pairs.begin(), m.pairs.end());
      EXPECT_EQ(got, match_oracle(a, b, ratio)) << seed << " " << ratio;
      EXPECT_EQ(m.shared_count, m.pairs.size());
    }
  }
}

TEST(Matching, OneToOneSymmetricAndMonotoneInRatio) {
  const FeatureSet a = extract_features(fixtures::textured(256, 256, 8));
  const FeatureSet b = extract_features(fixtures::rotate90(fixtures::textured(256, 256, 8)));
  std::set<std::pair<std::uint32_t, std::uint32_t>> previous;
  for (double ratio : {0.2, 0.4, 0.6, 0.8, 0.95}) {
    const MatchResult m = match_features(a, b, ratio);
    std::set<std::uint32_t> left, right;
    for (auto [i, j] : m.pairs) {
      EXPECT_TRUE(left.insert(i).second);
      EXPECT_TRUE(right.insert(j).second);
    }
    EXPECT_EQ(m.shared_count, match_features(b, a, ratio).shared_count);
    const std::set<std::pair<std::uint32_t, std::uint32_t>> now(m.pairs.begin(), m.pairs.end());
    EXPECT_TRUE(std::includes(now.begin(), now.end(), previous.begin(), previous.end())) << ratio;
    previous = now;
  }
  const MatchResult one = match_features(a, b, 0.6, false);
  std::set<std::uint32_t> left, right;
  for (auto [i, j] : one.pairs) {
    EXPECT_TRUE(left.insert(i).second);
    EXPECT_TRUE(right.insert(j).second);
  }
  EXPECT_GE(one.shared_count, match_features(a, b, 0.6).shared_count);
}

TEST(FeatureCacheFormat, RoundTripAndCorruption) {
  const FeatureSet fs = extract_features(fixtures::textured(128, 128, 2), {}, "img-1");
  const Bytes enc = encode_feature_set(fs);
  EXPECT_EQ(decode_feature_set(enc), fs);
  EXPECT_EQ(std::string(enc.begin(), enc.begin() + 4), "SFT1");
  EXPECT_EQ(enc.size(), 4 + 4 + fs.image_id.size() + 4 + fs.size() * (7 * 4 + 128 * 4));

  auto code_of = [](const Bytes& b) {
    try {
      decode_feature_set(b);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  Bytes bad = enc;
  bad[0] = 'X';
  EXPECT_EQ(code_of(bad), Errc::BadFeatureCache);
  EXPECT_EQ(code_of(Bytes(enc.begin(), enc.end() - 1)), Errc::BadFeatureCache);
  Bytes longer = enc;
  longer.push_back(0);
  EXPECT_EQ(code_of(longer), Errc::BadFeatureCache);
}

TEST(FeatureCacheFormat, DirectoryCacheKeyedByContent) {
  const auto dir = std::filesystem::temp_directory_path() / ("simpack-fc-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  const FeatureCache cache(dir);
  const RawImage img = fixtures::textured(96, 96, 3);
  const Bytes file = write_pnm(img);
  const std::string key = feature_cache_key(file, {});
  EXPECT_EQ(key.size(), 64u);
  EXPECT_FALSE(cache.load(key, "a").has_value());
  const FeatureSet fs = extract_features(img, {}, "a");
  cache.store(key, fs);
  const auto back = cache.load(key, "b");
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->image_id, "b");
  EXPECT_EQ(back->keypoints, fs.keypoints);
  ScaleSpaceParams other;
  other.contrast_threshold = 0.04;
  EXPECT_NE(feature_cache_key(file, other), key);
  std::filesystem::remove_all(dir);
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(Bytes{}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex(as_bytes(std::string_view("abc"))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
