#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "simpack/cli.hpp"

using namespace simpack;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "simpack");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("simpack-test-cli-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::map<std::string, Bytes> snapshot(const fs::path& dir) {
  std::map<std::string, Bytes> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = read_file(e.path());
  return files;
}

// Small corpus shared by the tests below.
fs::path corpus() {
  static const fs::path dir = [] {
    const fs::path d = scratch("corpus");
    const Result r = run({"synth", "--seed", "7", "--bases", "3", "--variants", "5", "--width", "96", "--height",
                          "96", "--unrelated", "5", "-o", d.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }();
  return dir;
}

std::string manifest() { return (corpus() / "manifest.json").string(); }

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"synth", "-o", "x", "--bogus"}).code, 1);
  EXPECT_EQ(run({"synth"}).code, 1);
  EXPECT_EQ(run({"features", "--manifest", manifest(), "--ratio", "1.5"}).code, 1);
  EXPECT_EQ(run({"group", "--manifest", manifest(), "--strategy", "clique"}).code, 1);
  EXPECT_EQ(run({"group", "--manifest", manifest(), "--strategy", "top_n"}).code, 1);
  EXPECT_EQ(run({"pack", "--backend", "zstd", "a"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, SynthWritesManifest) {
  const Manifest m = load_manifest(manifest());
  EXPECT_EQ(m.entries.size(), 3u * 5 + 5);
}

TEST(Cli, UnpackMissingNamesTheFile) {
  const Result r = run({"unpack", "missing.simg"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.simg"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST(Cli, MissingExternalToolIsExitThree) {
  const fs::path dir = scratch("ext");
  write_file(dir / "a.bin", std::string_view("hello"));
  const Result r = run({"pack", "--backend", "ext:definitely-not-a-tool", (dir / "a.bin").string(), "-o",
                        (dir / "a.simg").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("definitely-not-a-tool"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "a.simg"));
}

TEST(Cli, DataErrors) {
  const fs::path dir = scratch("data");
  write_file(dir / "bad.json", std::string_view("{not json"));
  EXPECT_EQ(run({"features", "--manifest", (dir / "bad.json").string()}).code, 2);
  write_file(dir / "junk.simg", std::string_view("SIMGjunk"));
  EXPECT_EQ(run({"unpack", (dir / "junk.simg").string(), "-d", (dir / "out").string()}).code, 2);
  EXPECT_EQ(run({"pack", (dir / "absent.ppm").string(), "-o", (dir / "x.simg").string()}).code, 2);
}

TEST(Cli, PackFilesAndUnpack) {
  const fs::path dir = scratch("files");
  const auto before = snapshot(corpus());
  const std::string a = (corpus() / "s01v01.pnm").string();
  const std::string b = (corpus() / "s01v02.pnm").string();
  const Result p = run({"pack", a, b, "--label", "pair", "-o", (dir / "pair.simg").string()});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_TRUE(p.out.starts_with("pair,"));

  const Result u = run({"unpack", (dir / "pair.simg").string(), "-d", (dir / "out").string()});
  ASSERT_EQ(u.code, 0) << u.err;
  EXPECT_EQ(u.out, "s01v01.pnm\ns01v02.pnm\n");
  EXPECT_EQ(read_file(dir / "out/s01v01.pnm"), read_file(a));
  EXPECT_EQ(read_file(dir / "out/s01v02.pnm"), read_file(b));
  EXPECT_EQ(snapshot(corpus()), before);
}

TEST(Cli, ExternalBackendRoundTrip) {
  const fs::path dir = scratch("extcat");
  const std::string a = (corpus() / "s02v01.pnm").string();
  ASSERT_EQ(run({"pack", a, "--backend", "ext:cat::cat", "-o", (dir / "c.simg").string()}).code, 0);
  EXPECT_EQ(run({"unpack", (dir / "c.simg").string(), "-d", (dir / "o1").string()}).code, 1);
  ASSERT_EQ(run({"unpack", (dir / "c.simg").string(), "-d", (dir / "o2").string(), "--backend", "ext:cat::cat"}).code,
            0);
  EXPECT_EQ(read_file(dir / "o2/s02v01.pnm"), read_file(a));
}

TEST(Cli, GroupThenPack) {
  const fs::path dir = scratch("groups");
  const auto before = snapshot(corpus());
  const Result g = run({"group", "--manifest", manifest(), "--strategy", "top_n", "--size", "3", "-o",
                        (dir / "top3.json").string()});
  ASSERT_EQ(g.code, 0) << g.err;
  const auto groups = groups_from_json(nlohmann::json::parse(read_file(dir / "top3.json")));
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups[1].label, "g2");
  EXPECT_EQ(groups[1].image_ids, (std::vector<std::string>{"s02v01", "s02v02", "s02v03"}));

  const Result p = run({"pack", "--manifest", manifest(), "--groups", (dir / "top3.json").string(), "-o",
                        (dir / "archives").string()});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_TRUE(fs::exists(dir / "archives/g3.simg"));
  const auto files = unpack(read_file(dir / "archives/g3.simg"));
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(files[2].data, read_file(corpus() / "s03v03.pnm"));

  const Result one = run({"pack", "--manifest", manifest(), "--group", "g2", "-o", (dir / "g2.simg").string()});
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_EQ(read_archive_header(read_file(dir / "g2.simg")).entries.size(), 5u);
  const Result by_tag =
      run({"pack", "--manifest", manifest(), "--group", "scene02", "-o", (dir / "scene02.simg").string()});
  ASSERT_EQ(by_tag.code, 0) << by_tag.err;
  EXPECT_EQ(unpack(read_file(dir / "scene02.simg")), unpack(read_file(dir / "g2.simg")));
  EXPECT_EQ(run({"pack", "--manifest", manifest(), "--group", "g9", "-o", (dir / "g9.simg").string()}).code, 2);

  const Result r = run({"group", "--manifest", manifest(), "--strategy", "random", "--size", "4", "--count", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rg = groups_from_json(nlohmann::json::parse(r.out));
  ASSERT_EQ(rg.size(), 2u);
  EXPECT_EQ(rg[0].label, "r1");
  for (const auto& id : rg[0].image_ids) EXPECT_EQ(id[0], 'u');

  EXPECT_EQ(snapshot(corpus()), before);
}

TEST(Cli, FeaturesUseCache) {
  const fs::path dir = scratch("features");
  const fs::path cache = dir / "cache";
  const std::vector<std::string> args{"features", "--manifest", manifest(), "--tag", "scene01",
                                      "--pairs",  "--cache",    cache.string()};
  const Result first = run(args);
  ASSERT_EQ(first.code, 0) << first.err;
  std::size_t cached = 0;
  for (const auto& e : fs::directory_iterator(cache)) cached += e.is_regular_file();
  EXPECT_EQ(cached, 5u);
  const Result second = run(args);
  EXPECT_EQ(second.out, first.out);
  const auto doc = nlohmann::json::parse(first.out);
  EXPECT_EQ(doc["images"].size(), 5u);
  EXPECT_EQ(doc["pairs"].size(), 10u);

  auto no_cache = args;
  no_cache.push_back("--no-cache");
  EXPECT_EQ(run(no_cache).out, first.out);
}

TEST(Cli, SiftPickedGroups) {
  const Result g = run({"group", "--manifest", manifest(), "--strategy", "sift_picked", "--no-cache"});
  ASSERT_EQ(g.code, 0) << g.err;
  const auto groups = groups_from_json(nlohmann::json::parse(g.out));
  ASSERT_EQ(groups.size(), 3u);
  for (const auto& grp : groups) {
    EXPECT_EQ(grp.strategy, Strategy::SiftPicked);
    EXPECT_GE(grp.size(), 1u);
    EXPECT_LE(grp.size(), 5u);
  }
}

TEST(Cli, BenchJobsDoNotChangeOutput) {
  const fs::path dir = scratch("bench");
  nlohmann::json cfg = bench_config_to_json(BenchConfig{});
  cfg["corpus"]["n_bases"] = 3;
  cfg["corpus"]["variants_per_base"] = 5;
  cfg["corpus"]["width"] = 96;
  cfg["corpus"]["height"] = 96;
  cfg["corpus"]["n_unrelated"] = 5;
  write_file(dir / "cfg.json", cfg.dump());
  for (const char* jobs : {"1", "8"}) {
    const std::string tag = std::string("j") + jobs;
    const Result r = run({"bench", "--config", (dir / "cfg.json").string(), "--workdir", (dir / (tag + "w")).string(),
                          "--archives", (dir / (tag + "a")).string(), "--jobs", jobs, "-o",
                          (dir / (tag + ".csv")).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(read_file(dir / "j1.csv"), read_file(dir / "j8.csv"));
  EXPECT_EQ(snapshot(dir / "j1a"), snapshot(dir / "j8a"));
  EXPECT_FALSE(snapshot(dir / "j1a").empty());
  const CFReport rep = parse_csv_report(std::string_view(
      reinterpret_cast<const char*>(read_file(dir / "j1.csv").data()), read_file(dir / "j1.csv").size()));
  EXPECT_EQ(rep.rows.size(), snapshot(dir / "j1a").size());
}

TEST(Cli, BenchOnManifestWithOneBackend) {
  const fs::path dir = scratch("bench-manifest");
  const Result r = run({"bench", "--manifest", manifest(), "--backend", "identity", "--no-cache", "-o",
                        (dir / "r.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Bytes raw = read_file(dir / "r.csv");
  const CFReport rep = parse_csv_report(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
  for (const auto& row : rep.rows) EXPECT_EQ(row.compressor, "identity");
  EXPECT_EQ(run({"bench", "--manifest", manifest(), "--backend", "ext:definitely-not-a-tool", "-o",
                 (dir / "x.csv").string()})
                .code,
            3);
}

TEST(Cli, SmokeSynthThenDefaultBench) {
  const fs::path dir = scratch("smoke");
  ASSERT_EQ(run({"synth", "--seed", "7", "-o", (dir / "corpus").string()}).code, 0);
  const Result r = run({"bench", "--config", "default", "-o", (dir / "r.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "r.csv"));
  EXPECT_GT(fs::file_size(dir / "r.csv"), 100u);
}

TEST(Cli, JobsFromEnvironment) {
  ::setenv("SIMPACK_JOBS", "3", 1);
  EXPECT_EQ(detail::default_jobs(), 3u);
  ::setenv("SIMPACK_JOBS", "zero", 1);
  EXPECT_GE(detail::default_jobs(), 1u);
  ::unsetenv("SIMPACK_JOBS");
}

TEST(Cli, ExitCodeMapping) {
  EXPECT_EQ(exit_code_for(Errc::InvalidArgument), 1);
  EXPECT_EQ(exit_code_for(Errc::CorruptPayload), 2);
  EXPECT_EQ(exit_code_for(Errc::MissingFile), 2);
  EXPECT_EQ(exit_code_for(Errc::MalformedHeader), 2);
  EXPECT_EQ(exit_code_for(Errc::ExternalBackendFailed), 3);
}
