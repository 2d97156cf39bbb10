#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "simpack/bytes.hpp"
#include "simpack/compressor.hpp"
#include "simpack/error.hpp"
#include "simpack/similarity.hpp"

namespace simpack {

// SIMG archive, little-endian:
//   "SIMG" | u16 version | varint label_len | label | u8 backend id |
//   u32 min_match | u8 hash_bits | u32 max_chain |
//   varint entry_count | entry_count x (varint name_len | name | varint raw_length) |
//   LRC1 container holding the concatenated files
inline constexpr std::string_view kArchiveMagic = "SIMG";
inline constexpr std::uint16_t kArchiveVersion = 1;

struct ArchiveEntry {
  std::string name;  // relative path, '/' separated
  std::uint64_t raw_length = 0;

  bool operator==(const ArchiveEntry&) const = default;
};

struct ArchiveHeader {
  std::uint16_t version = kArchiveVersion;
  std::string label;
  BackendKind backend = BackendKind::Lzss;
  LrParams params;
  std::vector<ArchiveEntry> entries;
  std::size_t payload_offset = 0;
};

struct NamedFile {
  std::string name;
  Bytes data;

  bool operator==(const NamedFile&) const = default;
};

/// Maps an image id to its entry name and raw bytes. Throws MissingFile.
using FileResolver = std::function<NamedFile(const std::string& image_id)>;

/// Compression factor record for one packed group.
struct CFRecord {
  std::string group;
  std::string strategy;
  std::string compressor;
  std::uint64_t s_old = 0;
  std::uint64_t s_new = 0;
  double cf = 0;

  bool operator==(const CFRecord&) const = default;
};

inline double compression_factor(std::uint64_t s_old, std::uint64_t s_new) {
  if (s_new == 0) throw Error(Errc::ZeroCompressedSize, "compressed size is zero");
  return static_cast<double>(s_old) / static_cast<double>(s_new);
}

inline bool valid_entry_name(std::string_view name) {
  if (name.empty() || name.front() == '/' || name.find('\\') != std::string_view::npos ||
      name.find('\0') != std::string_view::npos)
    return false;
  std::size_t start = 0;
  while (start <= name.size()) {
    std::size_t end = name.find('/', start);
    if (end == std::string_view::npos) end = name.size();
    const std::string_view part = name.substr(start, end - start);
    if (part.empty() || part == "." || part == "..") return false;
    start = end + 1;
  }
  return true;
}

/// Concatenates the group's files in group order and compresses the result
/// as one stream.
inline Bytes pack(const PhotoGroup& group, const FileResolver& resolve, const LrParams& p = {},
                  const BackendSpec& b = BackendSpec::lzss()) {
  p.validate();
  if (group.image_ids.empty()) throw Error(Errc::EmptyInput, "group '" + group.label + "' is empty");

  std::vector<ArchiveEntry> entries;
  std::set<std::string> names;
  Bytes joined;
  for (const auto& id : group.image_ids) {
    NamedFile f = resolve(id);
    if (!valid_entry_name(f.name)) throw Error(Errc::InvalidArgument, "bad entry name '" + f.name + "'");
    if (!names.insert(f.name).second) throw Error(Errc::InvalidArgument, "duplicate entry name '" + f.name + "'");
    entries.push_back({f.name, f.data.size()});
    joined.insert(joined.end(), f.data.begin(), f.data.end());
  }

  Bytes out;
  ByteWriter w(out);
  w.raw(kArchiveMagic);
  w.u16(kArchiveVersion);
  w.str(group.label);
  w.u8(static_cast<std::uint8_t>(b.kind));
  w.u32(p.min_match);
  w.u8(static_cast<std::uint8_t>(p.hash_bits));
  w.u32(p.max_chain);
  w.varint(entries.size());
  for (const auto& e : entries) {
    w.str(e.name);
    w.varint(e.raw_length);
  }
  w.raw(compress(joined, p, b));
  return out;
}

inline ArchiveHeader read_archive_header(ByteView archive) {
  if (archive.size() < 4 || !std::equal(kArchiveMagic.begin(), kArchiveMagic.end(), archive.begin()))
    throw Error(Errc::BadMagic, "not a SIMG archive");
  ByteReader r(archive.subspan(4), Errc::CorruptPayload);
  ArchiveHeader h;
  h.version = r.u16();
  if (h.version != kArchiveVersion) throw Error(Errc::UnsupportedVersion, "archive version " + std::to_string(h.version));
  h.label = r.str();
  const std::uint8_t id = r.u8();
  if (id > static_cast<std::uint8_t>(BackendKind::External))
    throw Error(Errc::CorruptPayload, "unknown backend id " + std::to_string(id));
  h.backend = static_cast<BackendKind>(id);
  h.params.min_match = r.u32();
  h.params.hash_bits = r.u8();
  h.params.max_chain = r.u32();
  const std::uint64_t count = r.varint();
  if (count > r.remaining()) throw Error(Errc::CorruptPayload, "entry count exceeds archive size");
  std::set<std::string> names;
  for (std::uint64_t k = 0; k < count; ++k) {
    ArchiveEntry e;
    e.name = r.str();
    e.raw_length = r.varint();
    if (!valid_entry_name(e.name)) throw Error(Errc::CorruptPayload, "bad entry name '" + e.name + "'");
    if (!names.insert(e.name).second) throw Error(Errc::EntryTableMismatch, "duplicate entry '" + e.name + "'");
    h.entries.push_back(std::move(e));
  }
  h.payload_offset = 4 + r.pos();
  return h;
}

/// Decodes every entry in memory. Nothing is returned unless the whole
/// archive is consistent.
inline std::vector<NamedFile> unpack(ByteView archive, const BackendSpec* external = nullptr) {
  const ArchiveHeader h = read_archive_header(archive);
  const ByteView container = archive.subspan(h.payload_offset);
  const ContainerHeader ch = read_container_header(container);
  if (ch.backend != h.backend || ch.min_match != h.params.min_match)
    throw Error(Errc::CorruptPayload, "archive header disagrees with payload header");
  const Bytes joined = decompress(container, external);

  std::uint64_t total = 0;
  for (const auto& e : h.entries) total += e.raw_length;
  if (total != joined.size())
    throw Error(Errc::EntryTableMismatch, "entry table covers " + std::to_string(total) + " bytes, payload has " +
                                              std::to_string(joined.size()));
  std::vector<NamedFile> files;
  files.reserve(h.entries.size());
  std::size_t at = 0;
  for (const auto& e : h.entries) {
    files.push_back({e.name, Bytes(joined.begin() + static_cast<std::ptrdiff_t>(at),
                                   joined.begin() + static_cast<std::ptrdiff_t>(at + e.raw_length))});
    at += e.raw_length;
  }
  return files;
}

/// Unpacks into `dir`. Files are staged in a hidden directory and moved into
/// place only after the whole archive decoded and every file was written.
inline std::vector<NamedFile> extract(ByteView archive, const std::filesystem::path& dir,
                                      const BackendSpec* external = nullptr) {
  std::vector<NamedFile> files = unpack(archive, external);
  namespace fs = std::filesystem;
  static std::atomic<std::uint64_t> counter{0};
  fs::create_directories(dir);
  const fs::path staging =
      dir / (".simpack-staging-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
  try {
    for (const auto& f : files) {
      const fs::path p = staging / fs::path(f.name);
      fs::create_directories(p.parent_path());
      write_file(p, f.data);
    }
    for (const auto& f : files) {
      const fs::path target = dir / fs::path(f.name);
      fs::create_directories(target.parent_path());
      fs::rename(staging / fs::path(f.name), target);
    }
  } catch (const fs::filesystem_error& e) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw Error(Errc::IoFailure, e.what());
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  std::error_code ec;
  fs::remove_all(staging, ec);
  return files;
}

/// CF record for an archive built from `group`: s_old is the sum of entry
/// lengths, s_new the full archive size.
inline CFRecord cf_record(ByteView archive, std::string group, std::string strategy, std::string compressor) {
  const ArchiveHeader h = read_archive_header(archive);
  CFRecord rec;
  rec.group = std::move(group);
  rec.strategy = std::move(strategy);
  rec.compressor = std::move(compressor);
  for (const auto& e : h.entries) rec.s_old += e.raw_length;
  rec.s_new = archive.size();
  rec.cf = compression_factor(rec.s_old, rec.s_new);
  return rec;
}

}  // namespace simpack
