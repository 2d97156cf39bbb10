#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "simpack/bytes.hpp"
#include "simpack/error.hpp"

namespace simpack {

struct LrParams {
  std::uint32_t min_match = 64;  // also the hashed window length
  std::uint32_t hash_bits = 22;
  std::uint32_t max_chain = 4;

  void validate() const {
    if (min_match < 16) throw Error(Errc::InvalidArgument, "min_match must be >= 16");
    if (hash_bits < 16 || hash_bits > 28) throw Error(Errc::InvalidArgument, "hash_bits must be in [16,28]");
    if (max_chain < 1) throw Error(Errc::InvalidArgument, "max_chain must be >= 1");
  }

  bool operator==(const LrParams&) const = default;
};

/// Literal tokens consume `length` bytes from TokenStream::literals in order;
/// Match tokens copy `length` bytes starting `distance` bytes back.
struct Token {
  enum class Kind : std::uint8_t { Literal, Match };
  Kind kind = Kind::Literal;
  std::uint64_t length = 0;
  std::uint64_t distance = 0;

  static Token literal(std::uint64_t len) { return {Kind::Literal, len, 0}; }
  static Token match(std::uint64_t dist, std::uint64_t len) { return {Kind::Match, len, dist}; }

  bool operator==(const Token&) const = default;
};

struct TokenStream {
  std::uint32_t min_match = 64;
  std::vector<Token> tokens;
  Bytes literals;

  std::uint64_t decoded_size() const {
    std::uint64_t n = 0;
    for (const auto& t : tokens) n += t.length;
    return n;
  }

  bool operator==(const TokenStream&) const = default;
};

/// Polynomial rolling hash over a fixed window, arithmetic mod 2^64:
/// h(s[i..i+w)) = sum s[i+k] * B^(w-1-k).
class RollingHash {
 public:
  static constexpr std::uint64_t kMultiplier = 0x100000001b3ULL;  // odd

  explicit RollingHash(std::size_t window) : window_(window) {
    out_factor_ = 1;
    for (std::size_t k = 1; k < window; ++k) out_factor_ *= kMultiplier;
  }

  static std::uint64_t compute(const std::uint8_t* p, std::size_t window) {
    std::uint64_t h = 0;
    for (std::size_t k = 0; k < window; ++k) h = h * kMultiplier + p[k];
    return h;
  }

  void reset(const std::uint8_t* p) { value_ = compute(p, window_); }

  /// Slide one byte: drop `out` from the front, append `in`.
  void roll(std::uint8_t out, std::uint8_t in) { value_ = (value_ - out * out_factor_) * kMultiplier + in; }

  std::uint64_t value() const noexcept { return value_; }
  std::size_t window() const noexcept { return window_; }

 private:
  std::size_t window_;
  std::uint64_t out_factor_;
  std::uint64_t value_ = 0;
};

namespace detail {

/// Bucketed position table, `ways` slots per bucket, most recent first.
/// Slots store position + 1 so zero means empty.
class ChunkIndex {
 public:
  ChunkIndex(std::uint32_t bits, std::uint32_t ways)
      : shift_(64 - bits), ways_(ways), slots_((std::size_t{1} << bits) * ways, 0) {}

  std::size_t bucket(std::uint64_t hash) const {
    return static_cast<std::size_t>((hash * 0x9e3779b97f4a7c15ULL) >> shift_);
  }

  const std::uint32_t* candidates(std::size_t b) const { return &slots_[b * ways_]; }
  std::uint32_t ways() const noexcept { return ways_; }

  void insert(std::size_t b, std::uint32_t pos) {
    std::uint32_t* s = &slots_[b * ways_];
    std::memmove(s + 1, s, (ways_ - 1) * sizeof(std::uint32_t));
    s[0] = pos + 1;
  }

 private:
  int shift_;
  std::uint32_t ways_;
  std::vector<std::uint32_t> slots_;
};

}  // namespace detail

/// Greedy long-distance match finder. Every window start outside a match is
/// indexed; inside a match only every min_match-th position is. Candidates
/// are verified byte-wise and extended forward as far as they agree.
inline TokenStream lr_encode(ByteView data, const LrParams& p = {}) {
  p.validate();
  if (data.size() >= std::numeric_limits<std::uint32_t>::max())
    throw Error(Errc::InvalidArgument, "input exceeds 4 GiB");
  TokenStream ts;
  ts.min_match = p.min_match;
  const std::size_t n = data.size();
  const std::size_t w = p.min_match;
  const std::uint8_t* src = data.data();

  std::size_t lit_start = 0;
  auto flush_literals = [&](std::size_t end) {
    if (end > lit_start) {
      ts.tokens.push_back(Token::literal(end - lit_start));
      ts.literals.insert(ts.literals.end(), src + lit_start, src + end);
    }
  };

  if (n >= w) {
    // No point in more buckets than window starts.
    const std::uint32_t bits =
        std::clamp<std::uint32_t>(static_cast<std::uint32_t>(std::bit_width(n)) + 1, 10, p.hash_bits);
    detail::ChunkIndex index(bits, p.max_chain);
    RollingHash hash(w);
    bool hash_valid = false;
    std::size_t i = 0;
    while (i + w <= n) {
      if (!hash_valid) {
        hash.reset(src + i);
        hash_valid = true;
      }
      const std::size_t b = index.bucket(hash.value());
      const std::uint32_t* cand = index.candidates(b);
      std::size_t best_len = 0;
      std::size_t best_pos = 0;
      for (std::uint32_t k = 0; k < index.ways() && cand[k] != 0; ++k) {
        const std::size_t c = cand[k] - 1;
        if (std::memcmp(src + c, src + i, w) != 0) continue;
        std::size_t len = w;
        while (i + len < n && src[c + len] == src[i + len]) ++len;
        if (len > best_len) {
          best_len = len;
          best_pos = c;
        }
      }
      index.insert(b, static_cast<std::uint32_t>(i));

      if (best_len >= w) {
        flush_literals(i);
        ts.tokens.push_back(Token::match(i - best_pos, best_len));
        for (std::size_t q = i + w; q < i + best_len && q + w <= n; q += w)
          index.insert(index.bucket(RollingHash::compute(src + q, w)), static_cast<std::uint32_t>(q));
        i += best_len;
        lit_start = i;
        hash_valid = false;
      } else {
        if (i + w < n) hash.roll(src[i], src[i + w]);
        ++i;
      }
    }
  }
  flush_literals(n);
  return ts;
}

/// Rebuilds the byte stream. Matches copy byte by byte so a distance shorter
/// than the length repeats the most recent bytes.
inline Bytes lr_decode(const TokenStream& ts) {
  Bytes out;
  std::size_t lit_pos = 0;
  for (const auto& t : ts.tokens) {
    if (t.length == 0) throw Error(Errc::BadLength, "zero-length token");
    if (t.kind == Token::Kind::Literal) {
      if (t.length > ts.literals.size() - lit_pos)
        throw Error(Errc::BadLength, "literal run exceeds literal buffer");
      out.insert(out.end(), ts.literals.begin() + static_cast<std::ptrdiff_t>(lit_pos),
                 ts.literals.begin() + static_cast<std::ptrdiff_t>(lit_pos + t.length));
      lit_pos += t.length;
    } else {
      if (t.length < ts.min_match) throw Error(Errc::BadLength, "match shorter than min_match");
      if (t.distance == 0 || t.distance > out.size())
        throw Error(Errc::BadDistance, "distance " + std::to_string(t.distance) + " at offset " +
                                           std::to_string(out.size()));
      const std::size_t at = out.size();
      const std::size_t from = at - t.distance;
      out.resize(at + t.length);
      if (t.distance >= t.length) {
        std::memcpy(out.data() + at, out.data() + from, t.length);
      } else {
        for (std::size_t k = 0; k < t.length; ++k) out[at + k] = out[from + k];
      }
    }
  }
  if (lit_pos != ts.literals.size()) throw Error(Errc::BadLength, "unused literal bytes");
  return out;
}

// Serialized form: varint total_size, then per token varint(length << 1 | is_match)
// followed by the literal bytes or varint distance.
inline Bytes serialize_tokens(const TokenStream& ts) {
  Bytes out;
  out.reserve(ts.literals.size() + 4 * ts.tokens.size() + 16);
  ByteWriter w(out);
  w.varint(ts.decoded_size());
  std::size_t lit_pos = 0;
  for (const auto& t : ts.tokens) {
    if (t.kind == Token::Kind::Literal) {
      w.varint(t.length << 1);
      w.raw(ByteView(ts.literals).subspan(lit_pos, t.length));
      lit_pos += t.length;
    } else {
      w.varint((t.length << 1) | 1);
      w.varint(t.distance);
    }
  }
  return out;
}

inline TokenStream deserialize_tokens(ByteView data, std::uint32_t min_match) {
  ByteReader r(data, Errc::CorruptPayload);
  TokenStream ts;
  ts.min_match = min_match;
  const std::uint64_t total = r.varint();
  if (total > (std::uint64_t{1} << 40)) throw Error(Errc::CorruptPayload, "implausible decoded size");
  std::uint64_t seen = 0;
  while (!r.empty()) {
    const std::uint64_t head = r.varint();
    const std::uint64_t len = head >> 1;
    if (len == 0 || len > total - seen) throw Error(Errc::CorruptPayload, "token length out of range");
    if (head & 1) {
      ts.tokens.push_back(Token::match(r.varint(), len));
    } else {
      auto bytes = r.take(static_cast<std::size_t>(len));
      ts.tokens.push_back(Token::literal(len));
      ts.literals.insert(ts.literals.end(), bytes.begin(), bytes.end());
    }
    seen += len;
  }
  if (seen != total) throw Error(Errc::CorruptPayload, "token stream shorter than declared size");
  return ts;
}

}  // namespace simpack
