#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "simpack/archive.hpp"
#include "simpack/compressor.hpp"
#include "simpack/error.hpp"
#include "simpack/feature_cache.hpp"
#include "simpack/features.hpp"
#include "simpack/longrange.hpp"
#include "simpack/manifest.hpp"
#include "simpack/parallel.hpp"
#include "simpack/rng.hpp"
#include "simpack/similarity.hpp"
#include "simpack/synth.hpp"

namespace simpack {

struct GroupStats {
  std::size_t n = 0;
  double max = 0;
  double mean = 0;
  double min = 0;
  double second_min = 0;  // second smallest by position; equals min when n == 1

  bool operator==(const GroupStats&) const = default;
};

inline GroupStats stats(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptyInput, "stats of an empty list");
  GroupStats s;
  s.n = values.size();
  double lo = values[0], lo2 = values[0], hi = values[0], sum = 0;
  bool have_two = false;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = values[k];
    sum += v;
    hi = std::max(hi, v);
    if (k == 0) continue;
    if (v < lo) {
      lo2 = lo;
      lo = v;
    } else if (!have_two || v < lo2) {
      lo2 = v;
    }
    have_two = true;
  }
  s.max = hi;
  s.min = lo;
  s.second_min = have_two ? lo2 : lo;
  s.mean = sum / static_cast<double>(values.size());
  return s;
}

/// Orders embedded digit runs by value, so "g2" < "g10" and "top_20" < "top_100".
inline bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  auto digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  while (i < a.size() && j < b.size()) {
    if (digit(a[i]) && digit(b[j])) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && digit(a[ie])) ++ie;
      while (je < b.size() && digit(b[je])) ++je;
      std::string_view na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return a.size() - i < b.size() - j;
  return a < b;
}

struct StatsRow {
  std::string strategy;
  std::string compressor;
  GroupStats stats;

  bool operator==(const StatsRow&) const = default;
};

struct Anomaly {
  std::string group;
  std::string strategy;
  std::size_t images = 0;

  bool operator==(const Anomaly&) const = default;
};

/// A packed group and the strategy label its rows carry ("top_20", "mixed", ...).
struct BenchGroup {
  std::string strategy;
  PhotoGroup group;
};

struct CFReport {
  std::vector<CFRecord> rows;
  std::vector<StatsRow> stats;
  std::vector<std::pair<std::string, std::string>> tags;  // group label, tag
  std::vector<Anomaly> anomalies;                          // sift_picked groups below 3 images
  std::vector<BenchGroup> groups;  // not part of the CSV

  bool operator==(const CFReport& o) const {
    return rows == o.rows && stats == o.stats && tags == o.tags && anomalies == o.anomalies;
  }
};

inline bool row_less(const CFRecord& a, const CFRecord& b) {
  if (a.group != b.group) return natural_less(a.group, b.group);
  if (a.strategy != b.strategy) return natural_less(a.strategy, b.strategy);
  return natural_less(a.compressor, b.compressor);
}

/// Sorts rows and recomputes the per (strategy, compressor) statistics.
inline void finalize_report(CFReport& r) {
  std::sort(r.rows.begin(), r.rows.end(), row_less);
  std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
  for (const auto& row : r.rows) cells[{row.strategy, row.compressor}].push_back(row.cf);
  r.stats.clear();
  for (const auto& [key, cfs] : cells) r.stats.push_back({key.first, key.second, stats(cfs)});
  std::sort(r.stats.begin(), r.stats.end(), [](const StatsRow& a, const StatsRow& b) {
    if (a.strategy != b.strategy) return natural_less(a.strategy, b.strategy);
    return natural_less(a.compressor, b.compressor);
  });
}

struct BenchConfig {
  std::vector<std::string> strategies{"top_n", "sift_picked", "mixed", "random"};
  std::vector<std::uint32_t> sizes{100, 50, 20};
  bool sizes_in_percent = true;  // else absolute image counts
  std::vector<std::string> compressors{"lzss", "identity"};
  std::uint64_t seed = 2016;
  std::uint32_t threshold = 10;
  double ratio = 0.6;
  LrParams lr;
  std::uint32_t mixed_groups = 2;
  std::uint32_t random_groups = 2;
  std::uint32_t pooled_size = 0;  // mixed/random group size; 0 = largest top group
  SynthParams corpus;

  bool wants(Strategy s) const {
    return std::find(strategies.begin(), strategies.end(), strategy_name(s)) != strategies.end();
  }

  void validate() const {
    for (const auto& s : strategies) parse_strategy(s);
    for (const auto& c : compressors) BackendSpec::parse(c);
    for (auto n : sizes) {
      if (n == 0) throw Error(Errc::InvalidArgument, "group sizes must be >= 1");
      if (sizes_in_percent && n > 100) throw Error(Errc::InvalidArgument, "percent sizes must be <= 100");
    }
    if ((wants(Strategy::TopN) || wants(Strategy::SiftPicked)) && sizes.empty())
      throw Error(Errc::InvalidArgument, "top_n and sift_picked need at least one size");
    if (threshold < 1) throw Error(Errc::InvalidArgument, "threshold must be >= 1");
    if (!(ratio > 0 && ratio < 1)) throw Error(Errc::InvalidArgument, "ratio must be in (0, 1)");
    lr.validate();
    corpus.validate();
  }
};

namespace detail {

inline const std::map<std::string, std::uint32_t>& perturbation_names() {
  static const std::map<std::string, std::uint32_t> names{{"brightness_shift", kBrightnessShift},
                                                          {"translation", kTranslation},
                                                          {"gaussian_noise", kGaussianNoise},
                                                          {"rescale", kRescale}};
  return names;
}

template <class T>
T json_get(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline nlohmann::json bench_config_to_json(const BenchConfig& c) {
  nlohmann::json perturbations = nlohmann::json::array();
  for (const auto& [name, bit] : detail::perturbation_names())
    if (c.corpus.perturbations & bit) perturbations.push_back(name);
  return {{"strategies", c.strategies},
          {"sizes", c.sizes},
          {"size_unit", c.sizes_in_percent ? "percent" : "count"},
          {"compressors", c.compressors},
          {"seed", c.seed},
          {"threshold", c.threshold},
          {"ratio", c.ratio},
          {"min_match", c.lr.min_match},
          {"hash_bits", c.lr.hash_bits},
          {"max_chain", c.lr.max_chain},
          {"mixed_groups", c.mixed_groups},
          {"random_groups", c.random_groups},
          {"pooled_size", c.pooled_size},
          {"corpus",
           {{"seed", c.corpus.seed},
            {"n_bases", c.corpus.n_bases},
            {"variants_per_base", c.corpus.variants_per_base},
            {"width", c.corpus.width},
            {"height", c.corpus.height},
            {"n_unrelated", c.corpus.n_unrelated},
            {"off_topic", c.corpus.off_topic},
            {"perturbations", perturbations}}}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline BenchConfig bench_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"strategies", "sizes", "size_unit", "compressors", "seed",
                                           "threshold", "ratio", "min_match", "hash_bits", "max_chain",
                                           "mixed_groups", "random_groups", "pooled_size", "corpus"};
  static const std::set<std::string> corpus_known{"seed", "n_bases", "variants_per_base", "width",
                                                  "height", "n_unrelated", "off_topic", "perturbations"};
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw Error(Errc::InvalidArgument, "unknown config key '" + k + "'");

  BenchConfig c;
  using detail::json_get;
  c.strategies = json_get(j, "strategies", c.strategies);
  c.sizes = json_get(j, "sizes", c.sizes);
  const auto unit = json_get<std::string>(j, "size_unit", "percent");
  if (unit != "percent" && unit != "count") throw Error(Errc::InvalidArgument, "size_unit must be percent or count");
  c.sizes_in_percent = unit == "percent";
  c.compressors = json_get(j, "compressors", c.compressors);
  c.seed = json_get(j, "seed", c.seed);
  c.threshold = json_get(j, "threshold", c.threshold);
  c.ratio = json_get(j, "ratio", c.ratio);
  c.lr.min_match = json_get(j, "min_match", c.lr.min_match);
  c.lr.hash_bits = json_get(j, "hash_bits", c.lr.hash_bits);
  c.lr.max_chain = json_get(j, "max_chain", c.lr.max_chain);
  c.mixed_groups = json_get(j, "mixed_groups", c.mixed_groups);
  c.random_groups = json_get(j, "random_groups", c.random_groups);
  c.pooled_size = json_get(j, "pooled_size", c.pooled_size);
  if (j.contains("corpus")) {
    const auto& cj = j.at("corpus");
    if (!cj.is_object()) throw Error(Errc::InvalidArgument, "corpus must be a JSON object");
    for (const auto& [k, v] : cj.items())
      if (!corpus_known.count(k)) throw Error(Errc::InvalidArgument, "unknown corpus key '" + k + "'");
    auto& p = c.corpus;
    p.seed = json_get(cj, "seed", p.seed);
    p.n_bases = json_get(cj, "n_bases", p.n_bases);
    p.variants_per_base = json_get(cj, "variants_per_base", p.variants_per_base);
    p.width = json_get(cj, "width", p.width);
    p.height = json_get(cj, "height", p.height);
    p.n_unrelated = json_get(cj, "n_unrelated", p.n_unrelated);
    p.off_topic = json_get(cj, "off_topic", p.off_topic);
    if (cj.contains("perturbations")) {
      p.perturbations = 0;
      for (const auto& name : json_get<std::vector<std::string>>(cj, "perturbations", {})) {
        const auto it = detail::perturbation_names().find(name);
        if (it == detail::perturbation_names().end())
          throw Error(Errc::InvalidArgument, "unknown perturbation '" + name + "'");
        p.perturbations |= it->second;
      }
    }
  }
  c.validate();
  return c;
}

/// "default" names the built-in configuration; anything else is a JSON file.
inline BenchConfig load_bench_config(const std::string& spec) {
  if (spec == "default") return BenchConfig{};
  const Bytes raw = read_file(spec, Errc::MissingFile);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, "config " + spec + ": " + e.what());
  }
  return bench_config_from_json(j);
}

/// Features for each image, taken from `cache` when present and stored
/// there otherwise.
inline std::vector<FeatureSet> cached_features(const std::vector<std::pair<std::string, const Bytes*>>& images,
                                               const ScaleSpaceParams& params, const FeatureCache* cache,
                                               unsigned jobs) {
  std::vector<FeatureSet> out(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t k) {
    const auto& [id, bytes] = images[k];
    std::string key;
    if (cache) {
      key = feature_cache_key(*bytes, params);
      if (auto hit = cache->load(key, id)) {
        out[k] = std::move(*hit);
        return;
      }
    }
    out[k] = extract_features(parse_pnm(*bytes), params, id);
    if (cache) cache->store(key, out[k]);
  });
  return out;
}

/// Archive entry name for a manifest entry: its relative path when that is
/// a safe name, otherwise the file name.
inline std::string entry_name(const ManifestEntry& e) {
  std::string name = std::filesystem::path(e.path).generic_string();
  if (valid_entry_name(name)) return name;
  return std::filesystem::path(e.path).filename().generic_string();
}

inline std::string file_slug(std::string_view s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

struct BenchOptions {
  unsigned jobs = 1;
  const FeatureCache* cache = nullptr;
  std::optional<std::filesystem::path> archive_dir;  // keep every archive as <group>.<strategy>.<compressor>.simg
  ScaleSpaceParams features;
};

/// Builds every requested group for every tag, packs each with every
/// compressor and records the CF. Tags other than "random" become groups
/// g1..gN in sorted order; sift_picked works on the largest top group.
inline CFReport run_experiment(const Manifest& m, const BenchConfig& c, const BenchOptions& o = {}) {
  c.validate();
  CFReport report;
  if (c.strategies.empty() || c.compressors.empty()) return report;

  std::map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : m.entries)
    if (!by_id.emplace(e.image_id, &e).second) throw Error(Errc::DuplicateImageId, e.image_id);

  std::vector<std::string> tags;
  for (const auto& t : m.tags())
    if (t != kRandomTag) tags.push_back(t);
  std::sort(tags.begin(), tags.end(), [](const std::string& a, const std::string& b) { return natural_less(a, b); });

  auto resolved_size = [&](std::uint32_t size, std::size_t available) -> std::size_t {
    if (!c.sizes_in_percent) return size;
    const auto n = static_cast<std::size_t>(std::lround(double(size) * double(available) / 100.0));
    return std::max<std::size_t>(1, n);
  };
  auto size_label = [&](std::uint32_t size) { return "top_" + std::to_string(size); };

  struct Cell {
    PhotoGroup group;
    std::string strategy;
  };
  std::vector<Cell> cells;
  std::vector<PhotoGroup> largest_top;  // per tag
  const bool need_top = c.wants(Strategy::TopN) || c.wants(Strategy::SiftPicked) || c.wants(Strategy::Mixed);
  const std::uint32_t largest_size = c.sizes.empty() ? 0 : *std::max_element(c.sizes.begin(), c.sizes.end());
  std::size_t pooled = c.pooled_size;

  for (std::size_t t = 0; t < tags.size() && need_top && !c.sizes.empty(); ++t) {
    const std::string label = "g" + std::to_string(t + 1);
    report.tags.emplace_back(label, tags[t]);
    std::size_t available = 0;
    for (const auto& e : m.entries) available += e.has_tag(tags[t]);
    largest_top.push_back(top_n(m.entries, tags[t], resolved_size(largest_size, available), label));
    if (c.pooled_size == 0) pooled = std::max(pooled, largest_top.back().size());
    if (c.wants(Strategy::TopN)) {
      std::set<std::uint32_t> seen;
      for (auto size : c.sizes) {
        if (!seen.insert(size).second) continue;
        cells.push_back({top_n(m.entries, tags[t], resolved_size(size, available), label), size_label(size)});
      }
    }
  }

  std::map<std::string, Bytes> files;
  auto load = [&](const std::vector<std::string>& ids) {
    for (const auto& id : ids) {
      if (files.count(id)) continue;
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw Error(Errc::MissingFile, "no manifest entry for '" + id + "'");
      files.emplace(id, read_file(m.resolve(*it->second), Errc::MissingFile));
    }
  };

  if (c.wants(Strategy::SiftPicked)) {
    std::vector<std::pair<std::string, const Bytes*>> images;
    for (const auto& g : largest_top) load(g.image_ids);
    std::set<std::string> queued;
    for (const auto& g : largest_top)
      for (const auto& id : g.image_ids)
        if (queued.insert(id).second) images.emplace_back(id, &files.at(id));
    const std::vector<FeatureSet> sets = cached_features(images, o.features, o.cache, o.jobs);
    std::map<std::string, const FeatureSet*> feature_of;
    for (const auto& s : sets) feature_of[s.image_id] = &s;
    for (const auto& g : largest_top) {
      std::vector<FeatureSet> members;
      for (const auto& id : g.image_ids) members.push_back(*feature_of.at(id));
      PhotoGroup picked = sift_picked(members, c.threshold, c.ratio, o.jobs, g.label);
      if (picked.size() < 3) report.anomalies.push_back({g.label, "sift_picked", picked.size()});
      cells.push_back({std::move(picked), "sift_picked"});
    }
  }

  if (c.wants(Strategy::Mixed)) {
    std::vector<ManifestEntry> pool;
    std::set<std::string> in_pool;
    for (const auto& g : largest_top)
      for (const auto& id : g.image_ids)
        if (in_pool.insert(id).second) pool.push_back(*by_id.at(id));
    for (std::uint32_t k = 1; k <= c.mixed_groups; ++k)
      cells.push_back({mixed_group(pool, pooled, mix_seed(c.seed, 0x6d00 + k), "m" + std::to_string(k)), "mixed"});
  }
  if (c.wants(Strategy::Random)) {
    std::vector<ManifestEntry> pool;
    for (const auto& e : m.entries)
      if (e.has_tag(kRandomTag)) pool.push_back(e);
    if (pooled == 0) pooled = pool.size();
    for (std::uint32_t k = 1; k <= c.random_groups; ++k)
      cells.push_back(
          {random_group(pool, pooled, mix_seed(c.seed, 0x7200 + k), "r" + std::to_string(k)), "random"});
  }

  for (const auto& cell : cells) load(cell.group.image_ids);
  auto resolve = [&](const std::string& id) -> NamedFile {
    return {entry_name(*by_id.at(id)), files.at(id)};
  };

  std::vector<BackendSpec> backends;
  for (const auto& name : c.compressors) backends.push_back(BackendSpec::parse(name));
  if (o.archive_dir) std::filesystem::create_directories(*o.archive_dir);

  report.rows.resize(cells.size() * backends.size());
  parallel_for(report.rows.size(), o.jobs, [&](std::size_t k) {
    const Cell& cell = cells[k / backends.size()];
    const BackendSpec& backend = backends[k % backends.size()];
    const Bytes archive = pack(cell.group, resolve, c.lr, backend);
    if (o.archive_dir)
      write_file(*o.archive_dir / (file_slug(cell.group.label) + "." + file_slug(cell.strategy) + "." +
                                   file_slug(backend.name()) + ".simg"),
                 archive);
    report.rows[k] = cf_record(archive, cell.group.label, cell.strategy, backend.name());
  });
  for (auto& cell : cells) report.groups.push_back({cell.strategy, std::move(cell.group)});
  finalize_report(report);
  return report;
}

namespace detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw Error(Errc::BadReport, "unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

inline constexpr std::string_view kCsvHeader = "group,strategy,compressor,s_old,s_new,cf";

inline std::string csv_report(const CFReport& r) {
  using detail::csv_field;
  using detail::fixed6;
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& row : r.rows)
    out << csv_field(row.group) << ',' << csv_field(row.strategy) << ',' << csv_field(row.compressor) << ','
        << row.s_old << ',' << row.s_new << ',' << fixed6(row.cf) << '\n';
  for (const auto& [label, tag] : r.tags) out << "#tag," << csv_field(label) << ',' << csv_field(tag) << '\n';
  if (!r.stats.empty()) out << "#stats,strategy,compressor,n,max,mean,second_min,min\n";
  for (const auto& s : r.stats)
    out << "#stats," << csv_field(s.strategy) << ',' << csv_field(s.compressor) << ',' << s.stats.n << ','
        << fixed6(s.stats.max) << ',' << fixed6(s.stats.mean) << ',' << fixed6(s.stats.second_min) << ','
        << fixed6(s.stats.min) << '\n';
  for (const auto& a : r.anomalies)
    out << "#anomaly," << csv_field(a.group) << ',' << csv_field(a.strategy) << ',' << a.images << '\n';
  return out.str();
}

inline void write_csv_report(const CFReport& r, const std::filesystem::path& path) { write_file(path, csv_report(r)); }

/// Reads back what csv_report wrote. cf values and statistics are recomputed
/// from the sizes and must agree with the printed ones.
inline CFReport parse_csv_report(std::string_view text) {
  CFReport r;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  auto number = [](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw Error(Errc::BadReport, "bad integer '" + s + "'");
    return std::stoull(s);
  };
  auto real = [](const std::string& s) -> double {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw Error(Errc::BadReport, "bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != kCsvHeader) throw Error(Errc::BadReport, "missing header");
      header = true;
      continue;
    }
    auto f = detail::csv_split(line);
    if (f[0] == "#tag") {
      if (f.size() != 3) throw Error(Errc::BadReport, "bad #tag row");
      r.tags.emplace_back(f[1], f[2]);
    } else if (f[0] == "#stats") {
      if (f.size() == 8 && f[1] == "strategy" && f[2] == "compressor") continue;
      if (f.size() != 8) throw Error(Errc::BadReport, "bad #stats row");
      GroupStats s{number(f[3]), real(f[4]), real(f[5]), real(f[7]), real(f[6])};
      r.stats.push_back({f[1], f[2], s});
    } else if (f[0] == "#anomaly") {
      if (f.size() != 4) throw Error(Errc::BadReport, "bad #anomaly row");
      r.anomalies.push_back({f[1], f[2], number(f[3])});
    } else if (f[0].starts_with("#")) {
      continue;
    } else {
      if (f.size() != 6) throw Error(Errc::BadReport, "expected 6 fields: " + line);
      CFRecord rec{f[0], f[1], f[2], number(f[3]), number(f[4]), 0};
      if (rec.s_new == 0) throw Error(Errc::BadReport, "s_new is zero");
      rec.cf = compression_factor(rec.s_old, rec.s_new);
      if (std::abs(rec.cf - real(f[5])) > 1e-6) throw Error(Errc::BadReport, "cf disagrees with sizes: " + line);
      r.rows.push_back(std::move(rec));
    }
  }
  if (!header) throw Error(Errc::BadReport, "missing header");
  const std::vector<StatsRow> printed = std::move(r.stats);
  finalize_report(r);
  if (printed.size() != r.stats.size()) throw Error(Errc::BadReport, "#stats rows do not cover the rows");
  for (std::size_t k = 0; k < printed.size(); ++k) {
    const auto& a = printed[k].stats;
    const auto& b = r.stats[k].stats;
    if (printed[k].strategy != r.stats[k].strategy || printed[k].compressor != r.stats[k].compressor ||
        a.n != b.n || std::abs(a.max - b.max) > 1e-6 || std::abs(a.mean - b.mean) > 1e-6 ||
        std::abs(a.min - b.min) > 1e-6 || std::abs(a.second_min - b.second_min) > 1e-6)
      throw Error(Errc::BadReport, "#stats row disagrees with the rows: " + printed[k].strategy);
  }
  return r;
}

}  // namespace simpack
