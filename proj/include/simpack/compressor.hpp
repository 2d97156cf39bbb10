#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "simpack/bytes.hpp"
#include "simpack/error.hpp"
#include "simpack/longrange.hpp"

namespace simpack {

// ---------------------------------------------------------------------------
// LZSS second stage: 64 KiB window, matches of 4..259 bytes.
// Layout: varint size, then groups of one flag byte (LSB first, 1 = match)
// and up to eight items. A literal is one byte; a match is u16 (distance-1)
// followed by u8 (length-4).

namespace lzss {

inline constexpr std::size_t kWindow = 65535;
inline constexpr std::size_t kMinMatch = 4;
inline constexpr std::size_t kMaxMatch = 259;
inline constexpr int kHashBits = 16;
inline constexpr int kMaxChain = 32;

inline std::uint32_t hash4(const std::uint8_t* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return (v * 2654435761u) >> (32 - kHashBits);
}

inline Bytes compress(ByteView in) {
  const std::size_t n = in.size();
  Bytes out;
  out.reserve(n + n / 8 + 16);
  ByteWriter(out).varint(n);
  const std::uint8_t* src = in.data();

  std::vector<std::int64_t> head(std::size_t{1} << kHashBits, -1);
  std::vector<std::int64_t> prev(kWindow + 1, -1);
  auto insert = [&](std::size_t pos) {
    if (pos + kMinMatch > n) return;
    const std::uint32_t h = hash4(src + pos);
    prev[pos & kWindow] = head[h];
    head[h] = static_cast<std::int64_t>(pos);
  };

  std::size_t i = 0;
  while (i < n) {
    const std::size_t flag_at = out.size();
    out.push_back(0);
    for (int bit = 0; bit < 8 && i < n; ++bit) {
      std::size_t best_len = 0;
      std::size_t best_dist = 0;
      if (i + kMinMatch <= n) {
        const std::size_t limit = std::min(kMaxMatch, n - i);
        std::int64_t c = head[hash4(src + i)];
        for (int chain = 0; chain < kMaxChain && c >= 0; ++chain) {
          const auto cand = static_cast<std::size_t>(c);
          if (i - cand > kWindow) break;
          std::size_t len = 0;
          while (len < limit && src[cand + len] == src[i + len]) ++len;
          if (len > best_len) {
            best_len = len;
            best_dist = i - cand;
            if (len == limit) break;
          }
          const std::int64_t next = prev[cand & kWindow];
          if (next >= c) break;  // slot reused by a newer position
          c = next;
        }
      }
      if (best_len >= kMinMatch) {
        out[flag_at] |= static_cast<std::uint8_t>(1u << bit);
        const std::size_t d = best_dist - 1;
        out.push_back(static_cast<std::uint8_t>(d));
        out.push_back(static_cast<std::uint8_t>(d >> 8));
        out.push_back(static_cast<std::uint8_t>(best_len - kMinMatch));
        for (std::size_t k = 0; k < best_len; ++k) insert(i + k);
        i += best_len;
      } else {
        out.push_back(src[i]);
        insert(i);
        ++i;
      }
    }
  }
  return out;
}

inline Bytes decompress(ByteView in) {
  ByteReader r(in, Errc::CorruptPayload);
  const std::uint64_t n = r.varint();
  if (n > (std::uint64_t{1} << 40)) throw Error(Errc::CorruptPayload, "implausible LZSS size");
  Bytes out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, in.size() * std::uint64_t{80})));
  while (out.size() < n) {
    const std::uint8_t flags = r.u8();
    for (int bit = 0; bit < 8 && out.size() < n; ++bit) {
      if (flags & (1u << bit)) {
        const std::size_t dist = std::size_t{r.u16()} + 1;
        const std::size_t len = std::size_t{r.u8()} + kMinMatch;
        if (dist > out.size() || len > n - out.size()) throw Error(Errc::CorruptPayload, "bad LZSS match");
        const std::size_t from = out.size() - dist;
        for (std::size_t k = 0; k < len; ++k) out.push_back(out[from + k]);
      } else {
        out.push_back(r.u8());
      }
    }
  }
  if (!r.empty()) throw Error(Errc::CorruptPayload, "trailing LZSS bytes");
  return out;
}

}  // namespace lzss

// ---------------------------------------------------------------------------
// Backends

enum class BackendKind : std::uint8_t { Identity = 0, Lzss = 1, External = 2 };

/// Second stage applied to the serialized token stream.
///
/// External commands run through /bin/sh. A command containing "{in}" and/or
/// "{out}" gets temporary file paths substituted; otherwise it reads standard
/// input and writes standard output. The inverse command defaults to the
/// compress command followed by " -d".
struct BackendSpec {
  BackendKind kind = BackendKind::Lzss;
  std::string command;
  std::string decompress_command;

  static BackendSpec identity() { return {BackendKind::Identity, {}, {}}; }
  static BackendSpec lzss() { return {BackendKind::Lzss, {}, {}}; }
  static BackendSpec external(std::string cmd, std::string dcmd = {}) {
    if (dcmd.empty()) dcmd = cmd + " -d";
    return {BackendKind::External, std::move(cmd), std::move(dcmd)};
  }

  /// "identity", "lzss", or "ext:<cmd>[::<decompress cmd>]".
  static BackendSpec parse(std::string_view text) {
    if (text == "identity") return identity();
    if (text == "lzss") return lzss();
    if (text.starts_with("ext:")) {
      std::string_view rest = text.substr(4);
      if (rest.empty()) throw Error(Errc::InvalidArgument, "ext: backend needs a command");
      const auto sep = rest.find("::");
      if (sep == std::string_view::npos) return external(std::string(rest));
      return external(std::string(rest.substr(0, sep)), std::string(rest.substr(sep + 2)));
    }
    throw Error(Errc::InvalidArgument, "unknown backend '" + std::string(text) + "'");
  }

  /// Label used in reports.
  std::string name() const {
    switch (kind) {
      case BackendKind::Identity: return "identity";
      case BackendKind::Lzss: return "lzss";
      case BackendKind::External: return "ext:" + command;
    }
    return "?";
  }
};

namespace detail {

class TempDir {
 public:
  TempDir() {
    static std::atomic<std::uint64_t> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 100; ++attempt) {
      path_ = base / ("simpack-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
      std::error_code ec;
      if (std::filesystem::create_directory(path_, ec)) return;
    }
    throw Error(Errc::IoFailure, "cannot create temporary directory");
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'')
      q += "'\\''";
    else
      q += c;
  }
  return q + "'";
}

inline void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

inline Bytes run_external(const std::string& command, ByteView input) {
  TempDir tmp;
  const auto in_path = tmp.path() / "in";
  const auto out_path = tmp.path() / "out";
  write_file(in_path, input);
  std::string cmd = command;
  if (cmd.find("{in}") != std::string::npos || cmd.find("{out}") != std::string::npos) {
    replace_all(cmd, "{in}", shell_quote(in_path.string()));
    replace_all(cmd, "{out}", shell_quote(out_path.string()));
  } else {
    cmd = "(" + cmd + ") < " + shell_quote(in_path.string()) + " > " + shell_quote(out_path.string());
  }
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    throw Error(Errc::ExternalBackendFailed, "'" + command + "' exited with status " + std::to_string(code));
  }
  std::error_code ec;
  if (!std::filesystem::exists(out_path, ec))
    throw Error(Errc::ExternalBackendFailed, "'" + command + "' produced no output");
  return read_file(out_path);
}

}  // namespace detail

/// Fails with ExternalBackendFailed when the first word of an external
/// command does not resolve to something the shell can run.
inline void check_backend(const BackendSpec& b) {
  if (b.kind != BackendKind::External) return;
  for (const std::string* cmd : {&b.command, &b.decompress_command}) {
    const auto start = cmd->find_first_not_of(" \t");
    if (start == std::string::npos) throw Error(Errc::ExternalBackendFailed, "empty external command");
    const auto end = cmd->find_first_of(" \t", start);
    const std::string tool = cmd->substr(start, end == std::string::npos ? std::string::npos : end - start);
    const std::string probe = "command -v " + detail::shell_quote(tool) + " >/dev/null 2>&1";
    if (std::system(probe.c_str()) != 0)
      throw Error(Errc::ExternalBackendFailed, "external tool '" + tool + "' not found");
  }
}

inline Bytes backend_encode(const BackendSpec& b, ByteView data) {
  switch (b.kind) {
    case BackendKind::Identity: return Bytes(data.begin(), data.end());
    case BackendKind::Lzss: return lzss::compress(data);
    case BackendKind::External: return detail::run_external(b.command, data);
  }
  throw Error(Errc::InvalidArgument, "unknown backend");
}

inline Bytes backend_decode(const BackendSpec& b, ByteView data) {
  switch (b.kind) {
    case BackendKind::Identity: return Bytes(data.begin(), data.end());
    case BackendKind::Lzss: return lzss::decompress(data);
    case BackendKind::External: return detail::run_external(b.decompress_command, data);
  }
  throw Error(Errc::InvalidArgument, "unknown backend");
}

// ---------------------------------------------------------------------------
// LRC1 container, little-endian:
//   "LRC1" | u16 version | u8 backend id | u32 min_match | u8 reserved | payload
// Empty input produces the header alone.

inline constexpr std::string_view kContainerMagic = "LRC1";
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderSize = 12;

struct ContainerHeader {
  std::uint16_t version = kContainerVersion;
  BackendKind backend = BackendKind::Lzss;
  std::uint32_t min_match = 64;
};

inline Bytes compress(ByteView data, const LrParams& p = {}, const BackendSpec& b = BackendSpec::lzss()) {
  p.validate();
  Bytes out;
  ByteWriter w(out);
  w.raw(kContainerMagic);
  w.u16(kContainerVersion);
  w.u8(static_cast<std::uint8_t>(b.kind));
  w.u32(p.min_match);
  w.u8(0);
  if (data.empty()) return out;
  const Bytes payload = backend_encode(b, serialize_tokens(lr_encode(data, p)));
  w.raw(payload);
  return out;
}

inline ContainerHeader read_container_header(ByteView container) {
  if (container.size() < 4 ||
      !std::equal(kContainerMagic.begin(), kContainerMagic.end(), container.begin()))
    throw Error(Errc::BadMagic, "not an LRC1 container");
  ByteReader r(container.subspan(4), Errc::CorruptPayload);
  ContainerHeader h;
  h.version = r.u16();
  if (h.version != kContainerVersion)
    throw Error(Errc::UnsupportedVersion, "container version " + std::to_string(h.version));
  const std::uint8_t id = r.u8();
  if (id > static_cast<std::uint8_t>(BackendKind::External))
    throw Error(Errc::CorruptPayload, "unknown backend id " + std::to_string(id));
  h.backend = static_cast<BackendKind>(id);
  h.min_match = r.u32();
  r.u8();
  if (h.min_match < 16) throw Error(Errc::CorruptPayload, "min_match below 16");
  return h;
}

/// Inverse of compress. An external-backend container needs the matching
/// external spec, since commands are not stored in the header.
inline Bytes decompress(ByteView container, const BackendSpec* external = nullptr) {
  const ContainerHeader h = read_container_header(container);
  const ByteView payload = container.subspan(kContainerHeaderSize);
  if (payload.empty()) return {};

  BackendSpec spec;
  switch (h.backend) {
    case BackendKind::Identity: spec = BackendSpec::identity(); break;
    case BackendKind::Lzss: spec = BackendSpec::lzss(); break;
    case BackendKind::External:
      if (!external || external->kind != BackendKind::External)
        throw Error(Errc::ExternalBackendFailed, "container needs an external backend command");
      spec = *external;
      break;
  }
  const Bytes serialized = backend_decode(spec, payload);
  try {
    return lr_decode(deserialize_tokens(serialized, h.min_match));
  } catch (const Error& e) {
    if (e.code() == Errc::BadDistance || e.code() == Errc::BadLength)
      throw Error(Errc::CorruptPayload, e.what());
    throw;
  }
}

}  // namespace simpack
