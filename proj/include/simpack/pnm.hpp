#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "simpack/bytes.hpp"
#include "simpack/error.hpp"

namespace simpack {

/// Decoded binary PNM image (P5 grayscale or P6 RGB), 8-bit samples,
/// row-major and channel-interleaved.
struct RawImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 0;  // 1 (P5) or 3 (P6)
  std::uint32_t maxval = 255;
  Bytes pixels;

  std::size_t sample_count() const noexcept {
    return std::size_t{width} * height * channels;
  }

  bool operator==(const RawImage&) const = default;
};

namespace detail {

inline bool pnm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(ByteView data) : data_(data) {}

  std::size_t pos() const noexcept { return pos_; }

  // Whitespace and '#' comments may precede every header token.
  std::uint64_t number(const char* what) {
    for (;;) {
      if (pos_ >= data_.size()) throw Error(Errc::MalformedHeader, std::string("missing ") + what);
      std::uint8_t c = data_[pos_];
      if (pnm_space(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n' && data_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
    std::uint64_t v = 0;
    std::size_t start = pos_;
    while (pos_ < data_.size() && data_[pos_] >= '0' && data_[pos_] <= '9') {
      v = v * 10 + (data_[pos_] - '0');
      if (v > std::numeric_limits<std::uint32_t>::max())
        throw Error(Errc::MalformedHeader, std::string(what) + " out of range");
      ++pos_;
    }
    if (pos_ == start) throw Error(Errc::MalformedHeader, std::string("non-numeric ") + what);
    return v;
  }

  void single_space() {
    if (pos_ >= data_.size() || !pnm_space(data_[pos_]))
      throw Error(Errc::MalformedHeader, "expected one whitespace byte after maxval");
    ++pos_;
  }

 private:
  ByteView data_;
  std::size_t pos_ = 2;
};

}  // namespace detail

/// Parses binary P5/P6 with maxval <= 255. The payload must be exactly
/// width*height*channels bytes after the single whitespace byte that ends
/// the header.
inline RawImage parse_pnm(ByteView data) {
  if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '6'))
    throw Error(Errc::UnknownMagic, "expected P5 or P6");

  if (data.size() < 3 || !(detail::pnm_space(data[2]) || data[2] == '#'))
    throw Error(Errc::MalformedHeader, "magic must be followed by whitespace");

  RawImage img;
  img.channels = data[1] == '5' ? 1 : 3;

  detail::PnmHeaderReader header(data);
  const std::uint64_t width = header.number("width");
  const std::uint64_t height = header.number("height");
  const std::uint64_t maxval = header.number("maxval");
  if (width == 0 || height == 0) throw Error(Errc::MalformedHeader, "zero dimension");
  if (maxval == 0) throw Error(Errc::MalformedHeader, "maxval must be positive");
  if (maxval > 255)
    throw Error(Errc::UnsupportedMaxval, "16-bit samples (maxval " + std::to_string(maxval) + ")");
  header.single_space();

  const std::uint64_t need = width * height * img.channels;
  if (need > (std::uint64_t{1} << 40)) throw Error(Errc::MalformedHeader, "image too large");
  const std::size_t have = data.size() - header.pos();
  if (have < need)
    throw Error(Errc::TruncatedPayload,
                "need " + std::to_string(need) + " payload bytes, have " + std::to_string(have));
  if (have > need)
    throw Error(Errc::TrailingGarbage, std::to_string(have - need) + " bytes after payload");

  img.width = static_cast<std::uint32_t>(width);
  img.height = static_cast<std::uint32_t>(height);
  img.maxval = static_cast<std::uint32_t>(maxval);
  auto payload = data.subspan(header.pos());
  img.pixels.assign(payload.begin(), payload.end());
  if (maxval < 255) {
    for (std::uint8_t v : img.pixels)
      if (v > maxval) throw Error(Errc::SampleExceedsMaxval, "sample above maxval");
  }
  return img;
}

/// Canonical encoding: "P5|P6\n<w> <h>\n<maxval>\n" followed by the payload.
inline Bytes write_pnm(const RawImage& img) {
  std::string header = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n" + std::to_string(img.maxval) + "\n";
  Bytes out;
  out.reserve(header.size() + img.pixels.size());
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

/// BT.601 luma, rounded half-up. Grayscale input is returned unchanged.
inline RawImage to_grayscale(const RawImage& img) {
  if (img.channels == 1) return img;
  RawImage out;
  out.width = img.width;
  out.height = img.height;
  out.channels = 1;
  out.maxval = img.maxval;
  const std::size_t n = std::size_t{img.width} * img.height;
  out.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t r = img.pixels[3 * i];
    const std::uint32_t g = img.pixels[3 * i + 1];
    const std::uint32_t b = img.pixels[3 * i + 2];
    // Exact in integers: weights are thousandths.
    std::uint32_t y = (299 * r + 587 * g + 114 * b + 500) / 1000;
    out.pixels[i] = static_cast<std::uint8_t>(y > img.maxval ? img.maxval : y);
  }
  return out;
}

}  // namespace simpack
