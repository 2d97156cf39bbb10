#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "simpack/bytes.hpp"
#include "simpack/error.hpp"

namespace simpack {

/// One image in a local manifest. `relevance_rank` is trusted as given:
/// 1 is the most relevant image for each of its tags.
struct ManifestEntry {
  std::string path;
  std::string image_id;
  std::vector<std::string> tags;
  std::uint32_t relevance_rank = 1;
  std::uint64_t size_bytes = 0;

  bool has_tag(const std::string& tag) const {
    return std::find(tags.begin(), tags.end(), tag) != tags.end();
  }

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::filesystem::path base_dir;  // relative entry paths resolve against this
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry& e) const {
    std::filesystem::path p(e.path);
    return p.is_absolute() ? p : base_dir / p;
  }

  const ManifestEntry* find(const std::string& id) const {
    for (const auto& e : entries)
      if (e.image_id == id) return &e;
    return nullptr;
  }

  std::vector<std::string> tags() const {
    std::set<std::string> all;
    for (const auto& e : entries) all.insert(e.tags.begin(), e.tags.end());
    return {all.begin(), all.end()};
  }
};

/// Structural checks: unique ids, ranks >= 1 and unique within each tag.
inline void validate_manifest(const Manifest& m, bool check_paths) {
  std::set<std::string> ids;
  std::map<std::string, std::set<std::uint32_t>> ranks;
  for (const auto& e : m.entries) {
    if (e.image_id.empty()) throw Error(Errc::BadManifest, "entry with empty id");
    if (!ids.insert(e.image_id).second) throw Error(Errc::DuplicateImageId, e.image_id);
    if (e.relevance_rank < 1) throw Error(Errc::BadManifest, "rank must be >= 1 for " + e.image_id);
    for (const auto& t : e.tags)
      if (!ranks[t].insert(e.relevance_rank).second)
        throw Error(Errc::BadManifest, "rank " + std::to_string(e.relevance_rank) + " repeated in tag " + t);
    if (check_paths) {
      std::error_code ec;
      if (!std::filesystem::exists(m.resolve(e), ec))
        throw Error(Errc::MissingFile, m.resolve(e).string());
    }
  }
}

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : m.entries)
    arr.push_back({{"path", e.path}, {"id", e.image_id}, {"tags", e.tags}, {"rank", e.relevance_rank},
                   {"bytes", e.size_bytes}});
  return arr;
}

inline Manifest manifest_from_json(const nlohmann::json& j, std::filesystem::path base_dir = {}) {
  if (!j.is_array()) throw Error(Errc::BadManifest, "manifest must be a JSON array");
  Manifest m;
  m.base_dir = std::move(base_dir);
  try {
    for (const auto& o : j) {
      ManifestEntry e;
      e.path = o.at("path").get<std::string>();
      e.image_id = o.at("id").get<std::string>();
      e.tags = o.at("tags").get<std::vector<std::string>>();
      const auto rank = o.at("rank").get<std::int64_t>();
      if (rank < 1) throw Error(Errc::BadManifest, "rank must be >= 1 for " + e.image_id);
      e.relevance_rank = static_cast<std::uint32_t>(rank);
      e.size_bytes = o.value("bytes", std::uint64_t{0});
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::BadManifest, ex.what());
  }
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path, bool check_paths = true) {
  const Bytes raw = read_file(path, Errc::MissingFile);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::BadManifest, path.string() + ": " + ex.what());
  }
  Manifest m = manifest_from_json(j, path.parent_path());
  validate_manifest(m, check_paths);
  return m;
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  write_file(path, manifest_to_json(m).dump(2) + "\n");
}

}  // namespace simpack
