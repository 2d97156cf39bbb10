#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>

#include "simpack/bytes.hpp"
#include "simpack/features.hpp"

namespace simpack {

// SFT1 record, little-endian:
//   "SFT1" | u32 id_len | id | u32 count |
//   count x (f32 x, y, sigma, orientation, response | i32 octave, layer | 128 x f32)
inline constexpr std::string_view kFeatureMagic = "SFT1";

inline Bytes encode_feature_set(const FeatureSet& fs) {
  Bytes out;
  out.reserve(16 + fs.image_id.size() + fs.size() * (28 + 4 * kDescriptorSize));
  ByteWriter w(out);
  w.raw(kFeatureMagic);
  w.u32(static_cast<std::uint32_t>(fs.image_id.size()));
  w.raw(fs.image_id);
  w.u32(static_cast<std::uint32_t>(fs.keypoints.size()));
  for (std::size_t i = 0; i < fs.keypoints.size(); ++i) {
    const Keypoint& k = fs.keypoints[i];
    w.f32(k.x);
    w.f32(k.y);
    w.f32(k.sigma);
    w.f32(k.orientation);
    w.f32(k.response);
    w.i32(k.octave);
    w.i32(k.layer);
    for (float v : fs.descriptors[i]) w.f32(v);
  }
  return out;
}

inline FeatureSet decode_feature_set(ByteView data) {
  ByteReader r(data, Errc::BadFeatureCache);
  auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kFeatureMagic.begin()))
    throw Error(Errc::BadFeatureCache, "missing SFT1 magic");
  FeatureSet fs;
  const std::uint32_t id_len = r.u32();
  auto id = r.take(id_len);
  fs.image_id.assign(id.begin(), id.end());
  const std::uint32_t count = r.u32();
  if (std::uint64_t{count} * (28 + 4 * kDescriptorSize) > r.remaining())
    throw Error(Errc::BadFeatureCache, "keypoint count exceeds record size");
  fs.keypoints.resize(count);
  fs.descriptors.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Keypoint& k = fs.keypoints[i];
    k.x = r.f32();
    k.y = r.f32();
    k.sigma = r.f32();
    k.orientation = r.f32();
    k.response = r.f32();
    k.octave = r.i32();
    k.layer = r.i32();
    for (float& v : fs.descriptors[i]) v = r.f32();
  }
  if (!r.empty()) throw Error(Errc::BadFeatureCache, "trailing bytes in SFT1 record");
  return fs;
}

/// SHA-256 hex digest.
inline std::string sha256_hex(ByteView data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error(Errc::IoFailure, "SHA-256 failed");
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

/// Cache key: digest of the image file contents plus every extraction setting.
inline std::string feature_cache_key(ByteView image_file, const ScaleSpaceParams& p) {
  Bytes keyed(image_file.begin(), image_file.end());
  const std::string params = "|o" + std::to_string(p.octaves) + "|s" + std::to_string(p.scales_per_octave) +
                             "|b" + std::to_string(p.base_sigma) + "|c" + std::to_string(p.contrast_threshold) +
                             "|e" + std::to_string(p.edge_ratio) + "|r" + std::to_string(p.border) + "|m" +
                             std::to_string(p.max_dimension);
  keyed.insert(keyed.end(), params.begin(), params.end());
  return sha256_hex(keyed);
}

/// Directory of SFT1 files named by cache key. The stored image id is
/// replaced on load, so identical images under different ids share a record.
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::optional<FeatureSet> load(const std::string& key, const std::string& image_id) const {
    const auto path = dir_ / (key + ".sft");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    FeatureSet fs = decode_feature_set(read_file(path));
    fs.image_id = image_id;
    return fs;
  }

  void store(const std::string& key, const FeatureSet& fs) const {
    std::filesystem::create_directories(dir_);
    const auto final_path = dir_ / (key + ".sft");
    const auto tmp =
        dir_ / (key + ".sft.tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    write_file(tmp, encode_feature_set(fs));
    std::filesystem::rename(tmp, final_path);
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace simpack
