#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "simpack/archive.hpp"
#include "simpack/bench.hpp"
#include "simpack/compressor.hpp"
#include "simpack/error.hpp"
#include "simpack/feature_cache.hpp"
#include "simpack/features.hpp"
#include "simpack/manifest.hpp"
#include "simpack/similarity.hpp"
#include "simpack/synth.hpp"

namespace simpack {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitExternal = 3 };

inline int exit_code_for(Errc c) {
  switch (c) {
    case Errc::InvalidArgument: return kExitUsage;
    case Errc::ExternalBackendFailed: return kExitExternal;
    default: return kExitData;
  }
}

// groups.json: {"groups": [{"label": "g1", "strategy": "top_n", "images": ["id", ...]}, ...]}
inline nlohmann::json groups_to_json(const std::vector<PhotoGroup>& groups) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : groups)
    arr.push_back({{"label", g.label}, {"strategy", strategy_name(g.strategy)}, {"images", g.image_ids}});
  return {{"groups", arr}};
}

inline std::vector<PhotoGroup> groups_from_json(const nlohmann::json& j) {
  std::vector<PhotoGroup> out;
  std::set<std::string> labels;
  try {
    for (const auto& o : j.at("groups")) {
      PhotoGroup g;
      g.label = o.at("label").get<std::string>();
      g.strategy = parse_strategy(o.at("strategy").get<std::string>());
      g.image_ids = o.at("images").get<std::vector<std::string>>();
      if (!labels.insert(g.label).second) throw Error(Errc::BadManifest, "duplicate group label '" + g.label + "'");
      std::set<std::string> seen;
      for (const auto& id : g.image_ids)
        if (!seen.insert(id).second) throw Error(Errc::DuplicateImageId, id + " in group " + g.label);
      out.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadManifest, std::string("groups file: ") + e.what());
  }
  return out;
}

namespace detail {

inline nlohmann::json parse_json_file(const std::filesystem::path& path, Errc bad) {
  const Bytes raw = read_file(path, Errc::MissingFile);
  try {
    return nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(bad, path.string() + ": " + e.what());
  }
}

inline unsigned default_jobs() {
  if (const char* env = std::getenv("SIMPACK_JOBS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void emit(const std::string& out_path, const std::string& text, std::ostream& out) {
  if (out_path.empty() || out_path == "-")
    out << text;
  else
    write_file(out_path, text);
}

struct CommonFlags {
  std::string manifest;
  std::uint32_t threshold = 10;
  double ratio = 0.6;
  std::uint32_t min_match = 64;
  std::string backend = "lzss";
  std::uint64_t seed = 2016;
  std::string out;
  unsigned jobs = 1;
  std::string cache;
  bool no_cache = false;
};

inline std::optional<FeatureCache> open_cache(const CommonFlags& f) {
  if (f.no_cache) return std::nullopt;
  if (!f.cache.empty()) return FeatureCache(f.cache);
  if (!f.manifest.empty()) return FeatureCache(std::filesystem::path(f.manifest).parent_path() / ".simpack-cache");
  return std::nullopt;
}

inline std::vector<std::pair<std::string, const Bytes*>> image_refs(const std::vector<std::string>& ids,
                                                                    const std::map<std::string, Bytes>& files) {
  std::vector<std::pair<std::string, const Bytes*>> refs;
  for (const auto& id : ids) refs.emplace_back(id, &files.at(id));
  return refs;
}

inline std::map<std::string, Bytes> read_images(const Manifest& m, const std::vector<std::string>& ids) {
  std::map<std::string, Bytes> files;
  for (const auto& id : ids) {
    const ManifestEntry* e = m.find(id);
    if (!e) throw Error(Errc::MissingFile, "no manifest entry for '" + id + "'");
    if (!files.count(id)) files.emplace(id, read_file(m.resolve(*e), Errc::MissingFile));
  }
  return files;
}

inline std::vector<std::string> group_tags(const Manifest& m) {
  std::vector<std::string> tags;
  for (const auto& t : m.tags())
    if (t != kRandomTag) tags.push_back(t);
  std::sort(tags.begin(), tags.end(), [](const std::string& a, const std::string& b) { return natural_less(a, b); });
  return tags;
}

}  // namespace detail

/// Entry point shared by the simpack binary and the tests. Returns the exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using detail::CommonFlags;
  CLI::App app{"simpack: similarity-aware image grouping and long-range archive compression"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  CommonFlags f;
  f.jobs = detail::default_jobs();

  auto add_jobs = [&](CLI::App* s) {
    s->add_option("--jobs", f.jobs, "Worker threads (default: $SIMPACK_JOBS or all cores)")
        ->check(CLI::Range(1u, 1024u));
  };
  auto add_features = [&](CLI::App* s) {
    s->add_option("--threshold", f.threshold, "Shared features needed for an edge")->check(CLI::Range(1u, 1u << 20));
    s->add_option("--ratio", f.ratio, "Nearest-neighbour ratio test")->check(CLI::Range(1e-6, 0.999999));
    s->add_option("--cache", f.cache, "Feature cache directory (default: <manifest dir>/.simpack-cache)");
    s->add_flag("--no-cache", f.no_cache, "Do not read or write the feature cache");
  };
  auto add_backend = [&](CLI::App* s) {
    s->add_option("--backend", f.backend, "identity | lzss | ext:<cmd>[::<decompress cmd>]");
    s->add_option("--min-match", f.min_match, "Long-range stage window and minimum match")
        ->check(CLI::Range(16u, 1u << 20));
  };

  // synth
  auto* synth = app.add_subcommand("synth", "Write the seeded synthetic corpus and its manifest");
  SynthParams sp;
  synth->add_option("--seed", sp.seed, "Corpus seed");
  synth->add_option("-o,--out", f.out, "Output directory")->required();
  synth->add_option("--bases", sp.n_bases, "Distinct scenes")->check(CLI::Range(1u, 9999u));
  synth->add_option("--variants", sp.variants_per_base, "Variants per scene")->check(CLI::Range(1u, 999u));
  synth->add_option("--width", sp.width, "Image width")->check(CLI::Range(64u, 8192u));
  synth->add_option("--height", sp.height, "Image height")->check(CLI::Range(64u, 8192u));
  synth->add_option("--unrelated", sp.n_unrelated, "Images tagged random")->check(CLI::Range(0u, 99999u));

  // features
  auto* features = app.add_subcommand("features", "Extract (or load cached) features for manifest images");
  std::vector<std::string> feature_tags;
  bool with_pairs = false;
  features->add_option("--manifest", f.manifest, "Manifest JSON")->required();
  features->add_option("--tag", feature_tags, "Restrict to images carrying these tags");
  features->add_flag("--pairs", with_pairs, "Also report shared-feature counts for every pair");
  features->add_option("-o,--out", f.out, "Summary JSON (default: standard output)");
  add_features(features);
  add_jobs(features);

  // group
  auto* group = app.add_subcommand("group", "Build photo groups and write them as JSON");
  std::string strategy_text;
  std::vector<std::string> group_tag;
  std::size_t group_size = 0;
  std::uint32_t group_count = 1;
  group->add_option("--manifest", f.manifest, "Manifest JSON")->required();
  group->add_option("--strategy", strategy_text, "top_n | sift_picked | mixed | random")
      ->required()
      ->check(CLI::IsMember({"top_n", "sift_picked", "mixed", "random"}));
  group->add_option("--tag", group_tag, "Tags to group (default: every tag except random)");
  group->add_option("--size", group_size, "Images per group (top_n, mixed, random); sift_picked starts from the top --size")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 30));
  group->add_option("--count", group_count, "Number of mixed or random groups")->check(CLI::Range(1u, 1000u));
  group->add_option("--seed", f.seed, "Seed for mixed and random sampling");
  group->add_option("-o,--out", f.out, "Groups JSON (default: standard output)");
  add_features(group);
  add_jobs(group);

  // pack
  auto* pack_cmd = app.add_subcommand("pack", "Concatenate files or manifest groups into SIMG archives");
  std::vector<std::string> pack_files;
  std::string groups_path, only_group, pack_label = "files";
  pack_cmd->add_option("files", pack_files, "Files to pack in order");
  pack_cmd->add_option("--manifest", f.manifest, "Manifest JSON");
  pack_cmd->add_option("--groups", groups_path, "Groups JSON from `simpack group`");
  pack_cmd->add_option("--group", only_group,
                       "Pack only this group; without --groups, a tag or gN for the N-th tag");
  pack_cmd->add_option("--label", pack_label, "Archive label when packing files");
  pack_cmd->add_option("-o,--out", f.out, "Archive path, or directory when packing several groups");
  add_backend(pack_cmd);
  add_jobs(pack_cmd);

  // unpack
  auto* unpack_cmd = app.add_subcommand("unpack", "Extract an archive into a directory");
  std::string archive_path;
  unpack_cmd->add_option("archive", archive_path, "SIMG archive")->required();
  unpack_cmd->add_option("-o,-d,--out", f.out, "Destination directory (default: .)");
  unpack_cmd->add_option("--backend", f.backend, "Needed for archives made with an ext: backend");

  // bench
  auto* bench = app.add_subcommand("bench", "Run the grouping x compressor sweep and write a CSV report");
  std::string config_spec = "default", workdir, archives_dir;
  std::optional<std::uint64_t> bench_seed;
  std::optional<std::uint32_t> bench_threshold, bench_min_match;
  std::optional<double> bench_ratio;
  std::optional<std::string> bench_backend;
  bench->add_option("--config", config_spec, "Config JSON file, or 'default'");
  bench->add_option("--manifest", f.manifest, "Use this manifest instead of synthesizing a corpus");
  bench->add_option("--workdir", workdir, "Where the synthetic corpus is written (default: temporary)");
  bench->add_option("--archives", archives_dir, "Keep every archive in this directory");
  bench->add_option("--cache", f.cache, "Feature cache directory");
  bench->add_flag("--no-cache", f.no_cache, "Do not read or write the feature cache");
  bench->add_option("--seed", bench_seed, "Overrides the config and corpus seeds");
  bench->add_option("--threshold", bench_threshold, "Overrides the config threshold")->check(CLI::Range(1u, 1u << 20));
  bench->add_option("--ratio", bench_ratio, "Overrides the config ratio")->check(CLI::Range(1e-6, 0.999999));
  bench->add_option("--min-match", bench_min_match, "Overrides the config min_match")->check(CLI::Range(16u, 1u << 20));
  bench->add_option("--backend", bench_backend, "Use only this compressor");
  bench->add_option("-o,--out", f.out, "CSV report path")->required();
  add_jobs(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      sp.validate();
      const Manifest m = synth_corpus(sp, f.out);
      out << (std::filesystem::path(f.out) / "manifest.json").string() << "\n";
      err << "wrote " << m.entries.size() << " images\n";
      return kExitOk;
    }

    if (features->parsed()) {
      const Manifest m = load_manifest(f.manifest);
      std::vector<std::string> ids;
      for (const auto& e : m.entries) {
        bool keep = feature_tags.empty();
        for (const auto& t : feature_tags) keep = keep || e.has_tag(t);
        if (keep) ids.push_back(e.image_id);
      }
      const auto files = detail::read_images(m, ids);
      const auto cache = detail::open_cache(f);
      const ScaleSpaceParams params;
      const auto sets =
          cached_features(detail::image_refs(ids, files), params, cache ? &*cache : nullptr, f.jobs);
      nlohmann::json images = nlohmann::json::array();
      for (std::size_t k = 0; k < sets.size(); ++k)
        images.push_back({{"id", ids[k]},
                          {"keypoints", sets[k].size()},
                          {"key", feature_cache_key(files.at(ids[k]), params)}});
      nlohmann::json doc{{"images", images}};
      if (with_pairs) {
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& c : pairwise_shared_counts(sets, f.ratio, f.jobs))
          pairs.push_back({{"a", ids[c.i]}, {"b", ids[c.j]}, {"shared", c.shared}});
        doc["pairs"] = pairs;
        doc["ratio"] = f.ratio;
      }
      detail::emit(f.out, doc.dump(2) + "\n", out);
      return kExitOk;
    }

    if (group->parsed()) {
      const Strategy strategy = parse_strategy(strategy_text);
      if ((strategy == Strategy::TopN || strategy == Strategy::Mixed || strategy == Strategy::Random) &&
          group_size == 0)
        throw Error(Errc::InvalidArgument, "--size is required for " + strategy_text);
      const Manifest m = load_manifest(f.manifest);
      const std::vector<std::string> tags = group_tag.empty() ? detail::group_tags(m) : group_tag;
      std::vector<PhotoGroup> groups;
      if (strategy == Strategy::Mixed || strategy == Strategy::Random) {
        std::vector<ManifestEntry> pool;
        for (const auto& e : m.entries) {
          const bool random_entry = e.has_tag(kRandomTag);
          if (strategy == Strategy::Random ? random_entry : !random_entry) pool.push_back(e);
        }
        const std::string prefix = strategy == Strategy::Mixed ? "m" : "r";
        for (std::uint32_t k = 1; k <= group_count; ++k)
          groups.push_back(sample_group(pool, group_size, mix_seed(f.seed, k), prefix + std::to_string(k), strategy));
      } else {
        for (std::size_t t = 0; t < tags.size(); ++t) {
          std::size_t available = 0;
          for (const auto& e : m.entries) available += e.has_tag(tags[t]);
          const std::size_t n = group_size == 0 ? available : group_size;
          const std::string label = group_tag.empty() ? "g" + std::to_string(t + 1) : tags[t];
          PhotoGroup top = top_n(m.entries, tags[t], n, label);
          if (strategy == Strategy::TopN) {
            groups.push_back(std::move(top));
            continue;
          }
          const auto files = detail::read_images(m, top.image_ids);
          const auto cache = detail::open_cache(f);
          const auto sets = cached_features(detail::image_refs(top.image_ids, files), ScaleSpaceParams{},
                                            cache ? &*cache : nullptr, f.jobs);
          PhotoGroup picked = sift_picked(sets, f.threshold, f.ratio, f.jobs, label);
          if (picked.size() < 3)
            err << "note: " << label << " sift_picked kept only " << picked.size() << " image(s)\n";
          groups.push_back(std::move(picked));
        }
      }
      detail::emit(f.out, groups_to_json(groups).dump(2) + "\n", out);
      return kExitOk;
    }

    if (pack_cmd->parsed()) {
      const BackendSpec backend = BackendSpec::parse(f.backend);
      LrParams lr;
      lr.min_match = f.min_match;
      lr.validate();
      check_backend(backend);
      const bool from_groups = !groups_path.empty() || !only_group.empty();
      if (from_groups == !pack_files.empty())
        throw Error(Errc::InvalidArgument, "give either files or --manifest with --groups or --group");
      if (from_groups && f.manifest.empty()) throw Error(Errc::InvalidArgument, "--groups and --group need --manifest");
      if (f.out.empty()) throw Error(Errc::InvalidArgument, "-o is required");

      auto report = [&](const Bytes& archive, const std::string& label) {
        const CFRecord r = cf_record(archive, label, "", backend.name());
        out << label << "," << r.s_old << "," << r.s_new << "," << detail::fixed6(r.cf) << "\n";
      };

      if (!from_groups) {
        std::map<std::string, Bytes> files;
        PhotoGroup g{pack_label, Strategy::TopN, {}};
        for (const auto& path : pack_files) {
          const std::string name = std::filesystem::path(path).filename().string();
          if (files.count(name)) throw Error(Errc::InvalidArgument, "two inputs named " + name);
          files.emplace(name, read_file(path, Errc::MissingFile));
          g.image_ids.push_back(name);
        }
        const Bytes archive = pack(g, [&](const std::string& id) { return NamedFile{id, files.at(id)}; }, lr, backend);
        write_file(f.out, archive);
        report(archive, g.label);
        return kExitOk;
      }

      const Manifest m = load_manifest(f.manifest);
      std::vector<PhotoGroup> groups;
      if (!groups_path.empty()) {
        groups = groups_from_json(detail::parse_json_file(groups_path, Errc::BadManifest));
      } else {
        const auto tags = detail::group_tags(m);
        std::string tag = only_group;
        if (std::find(tags.begin(), tags.end(), tag) == tags.end())
          for (std::size_t t = 0; t < tags.size(); ++t)
            if (only_group == "g" + std::to_string(t + 1)) tag = tags[t];
        std::size_t available = 0;
        for (const auto& e : m.entries) available += e.has_tag(tag);
        if (available == 0) throw Error(Errc::BadManifest, "no tag or group '" + only_group + "' in the manifest");
        groups.push_back(top_n(m.entries, tag, available, only_group));
      }
      if (!only_group.empty()) {
        std::erase_if(groups, [&](const PhotoGroup& g) { return g.label != only_group; });
        if (groups.empty()) throw Error(Errc::BadManifest, "no group labelled '" + only_group + "'");
      }
      std::vector<std::string> ids;
      for (const auto& g : groups) ids.insert(ids.end(), g.image_ids.begin(), g.image_ids.end());
      const auto files = detail::read_images(m, ids);
      auto resolve = [&](const std::string& id) { return NamedFile{entry_name(*m.find(id)), files.at(id)}; };
      std::vector<Bytes> archives(groups.size());
      parallel_for(groups.size(), f.jobs, [&](std::size_t k) { archives[k] = pack(groups[k], resolve, lr, backend); });
      if (!only_group.empty()) {
        write_file(f.out, archives[0]);
      } else {
        std::filesystem::create_directories(f.out);
        for (std::size_t k = 0; k < groups.size(); ++k)
          write_file(std::filesystem::path(f.out) / (file_slug(groups[k].label) + ".simg"), archives[k]);
      }
      for (std::size_t k = 0; k < groups.size(); ++k) report(archives[k], groups[k].label);
      return kExitOk;
    }

    if (unpack_cmd->parsed()) {
      const BackendSpec backend = BackendSpec::parse(f.backend);
      const Bytes archive = read_file(archive_path, Errc::MissingFile);
      const ArchiveHeader h = read_archive_header(archive);
      const BackendSpec* external = nullptr;
      if (h.backend == BackendKind::External) {
        if (backend.kind != BackendKind::External)
          throw Error(Errc::InvalidArgument, archive_path + " needs --backend ext:<cmd> to decode");
        check_backend(backend);
        external = &backend;
      }
      const auto files = extract(archive, f.out.empty() ? "." : f.out, external);
      for (const auto& file : files) out << file.name << "\n";
      return kExitOk;
    }

    if (bench->parsed()) {
      BenchConfig config = load_bench_config(config_spec);
      if (bench_seed) config.seed = config.corpus.seed = *bench_seed;
      if (bench_threshold) config.threshold = *bench_threshold;
      if (bench_ratio) config.ratio = *bench_ratio;
      if (bench_min_match) config.lr.min_match = *bench_min_match;
      if (bench_backend) config.compressors = {*bench_backend};
      config.validate();
      for (const auto& c : config.compressors) check_backend(BackendSpec::parse(c));

      std::optional<detail::TempDir> scratch;
      Manifest m;
      std::filesystem::path cache_dir = f.cache;
      if (!f.manifest.empty()) {
        m = load_manifest(f.manifest);
        if (cache_dir.empty()) cache_dir = std::filesystem::path(f.manifest).parent_path() / ".simpack-cache";
      } else {
        std::filesystem::path root;
        if (workdir.empty()) {
          scratch.emplace();
          root = scratch->path();
        } else {
          root = workdir;
        }
        m = synth_corpus(config.corpus, root / "corpus");
        if (cache_dir.empty()) cache_dir = root / "cache";
      }
      std::optional<FeatureCache> cache;
      if (!f.no_cache) cache.emplace(cache_dir);
      BenchOptions options;
      options.jobs = f.jobs;
      options.cache = cache ? &*cache : nullptr;
      if (!archives_dir.empty()) options.archive_dir = archives_dir;
      const CFReport report = run_experiment(m, config, options);
      write_csv_report(report, f.out);
      for (const auto& a : report.anomalies)
        err << "note: " << a.group << " " << a.strategy << " kept only " << a.images << " image(s)\n";
      err << "wrote " << report.rows.size() << " rows to " << f.out << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "simpack: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "simpack: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "simpack: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace simpack
