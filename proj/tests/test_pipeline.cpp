#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>

#include "d4d/parallel.hpp"
#include "d4d/pipeline.hpp"
#include "d4d/sequence_io.hpp"
#include "test_util.hpp"

using namespace d4d;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config() {
  PipelineConfig c;
  c.d_vis = 16;
  c.d_ins = 4;
  c.queries = 4;
  c.objects = 3;
  c.duration = 4.0;
  c.window = 2.0;
  c.stride = 2.0;
  c.octree_target = 20'000;
  c.token_budget = 256;
  c.fuse_cap = 1024;
  return c;
}

struct CliRun {
  int status = -1;
  std::string out;
};

CliRun run_cli(const std::string& args) {
  CliRun r;
  const std::string cmd = std::string(D4D_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  r.status = pclose(pipe);
  return r;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_text(e.path());
  }
  return files;
}

}  // namespace

TEST(PipelineConfig, Validation) {
  EXPECT_NO_THROW(PipelineConfig{}.validate());
  PipelineConfig c;
  c.d_vis = 0;
  EXPECT_ERRC(c.validate(), Errc::kConfig);
  c = {};
  c.fps = 0;
  EXPECT_ERRC(c.validate(), Errc::kConfig);
  c = {};
  c.alpha = 1.5;
  EXPECT_ERRC(c.validate(), Errc::kConfig);
  c = {};
  c.token_budget = 0;
  EXPECT_ERRC(c.validate(), Errc::kConfig);
}

TEST(PipelineConfig, JsonRoundTripAndUnknownKeys) {
  const PipelineConfig c = small_config();
  const PipelineConfig back = nlohmann::json(c).get<PipelineConfig>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
  const PipelineConfig partial = nlohmann::json{{"d_vis", 32}}.get<PipelineConfig>();
  EXPECT_EQ(partial.d_vis, 32u);
  EXPECT_EQ(partial.token_budget, PipelineConfig{}.token_budget);
  EXPECT_ERRC(nlohmann::json({{"d_viz", 32}}).get<PipelineConfig>(), Errc::kConfig);
  TempDir dir;
  write_text(dir / "c.json", "{\"fps\": -1}");
  EXPECT_ERRC(load_pipeline_config(dir / "c.json"), Errc::kConfig);
}

TEST(Pipeline, DeterministicArtifactsAndPerfectSelfEval) {
  TempDir dir;
  const auto s1 = run_pipeline(small_config(), dir / "a");
  const auto s2 = run_pipeline(small_config(), dir / "b");
  EXPECT_EQ(s1, s2);
  EXPECT_TRUE(s1["self_eval"]["perfect"].get<bool>());
  EXPECT_EQ(s1["camera_tokens"].get<std::size_t>(), 4u);
  EXPECT_LE(s1["scene_tokens"].get<std::size_t>(), 256u);
  EXPECT_LE(s1["voxels"].get<std::size_t>(), 20'000u);
  const auto a = snapshot(dir / "a");
  const auto b = snapshot(dir / "b");
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, bytes] : a) {
    ASSERT_TRUE(b.count(name)) << name;
    EXPECT_EQ(bytes, b.at(name)) << name;
  }
  for (const auto* f : {"points.d4dp", "voxels.d4dv", "weights.d4dw", "tokens.d4dt", "qa.jsonl",
                        "answers.jsonl", "report.json", "report.csv", "summary.json"}) {
    EXPECT_TRUE(a.count(f)) << f;
  }
}

TEST(Pipeline, ThreadCountDoesNotChangeArtifacts) {
  TempDir dir;
  const std::size_t before = thread_count();
  set_thread_count(1);
  run_pipeline(small_config(), dir / "one");
  set_thread_count(5);
  run_pipeline(small_config(), dir / "five");
  set_thread_count(before);
  EXPECT_EQ(snapshot(dir / "one"), snapshot(dir / "five"));
}

TEST(Pipeline, InspectEveryArtifact) {
  TempDir dir;
  run_pipeline(small_config(), dir / "run");
  std::size_t seen = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "run")) {
    if (!e.is_regular_file() || e.path().extension() == ".csv") continue;
    std::string text;
    EXPECT_NO_THROW(text = inspect_file(e.path())) << e.path();
    EXPECT_FALSE(text.empty()) << e.path();
    ++seen;
  }
  EXPECT_GT(seen, 10u);
  write_text(dir / "junk.bin", "ZZZZnot an artifact");
  EXPECT_ERRC(inspect_file(dir / "junk.bin"), Errc::kBadMagic);
  const std::string pts = read_text(dir / "run" / "points.d4dp");
  write_text(dir / "cut.d4dp", pts.substr(0, pts.size() / 2));
  EXPECT_ERRC(inspect_file(dir / "cut.d4dp"), Errc::kTruncated);
}

TEST(Cli, HelpListsEverySubcommandAndFlag) {
  const CliRun top = run_cli("--help");
  EXPECT_EQ(top.status, 0);
  for (const auto* sub : {"simulate", "lift", "compress", "encode", "qagen", "eval", "pipeline",
                          "inspect"}) {
    EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
  }
  const std::map<std::string, std::vector<std::string>> flags{
      {"simulate", {"--config", "--out", "--seed", "--stress"}},
      {"lift", {"--seq", "--encoder", "--dvis", "--dins", "--clamp", "--out"}},
      {"compress", {"--points", "--target", "--budget", "--leaf-min", "--out"}},
      {"encode", {"--voxels", "--poses", "--weights", "--budget", "--fuse-cap", "--out"}},
      {"qagen", {"--gt", "--fps", "--window", "--stride", "--dwell", "--out"}},
      {"eval", {"--qa", "--pred", "--report", "--csv"}},
      {"pipeline", {"--config", "--out", "--d-vis", "--budget"}},
  };
  for (const auto& [sub, list] : flags) {
    const CliRun r = run_cli(sub + " --help");
    EXPECT_EQ(r.status, 0) << sub;
    for (const auto& f : list) EXPECT_NE(r.out.find(f), std::string::npos) << sub << " " << f;
  }
}

TEST(Cli, StageChainAndErrors) {
  TempDir dir;
  const std::string d = dir.path.string();
  ASSERT_EQ(run_cli("-q simulate --out " + d + "/seq --objects 2 --duration 2").status, 0);
  ASSERT_EQ(run_cli("-q lift --seq " + d + "/seq --dvis 8 --dins 4 --out " + d + "/p.d4dp").status, 0);
  ASSERT_EQ(run_cli("-q compress --points " + d + "/p.d4dp --target 5000 --out " + d + "/v.d4dv").status, 0);
  ASSERT_EQ(run_cli("-q encode --voxels " + d + "/v.d4dv --poses " + d +
                    "/seq/poses.jsonl --queries 4 --out " + d + "/t.d4dt")
                .status,
            0);
  ASSERT_EQ(run_cli("-q qagen --gt " + d + "/seq/ground_truth.jsonl --window 2 --stride 2 --out " +
                    d + "/qa.jsonl")
                .status,
            0);
  ASSERT_EQ(run_cli("-q eval --qa " + d + "/qa.jsonl --pred " + d + "/qa.answers.jsonl --report " +
                    d + "/r.json")
                .status,
            0);
  const CliRun ok = run_cli("inspect " + d + "/t.d4dt");
  EXPECT_EQ(ok.status, 0);
  const std::string pts = read_text(dir / "p.d4dp");
  write_text(dir / "cut.d4dp", pts.substr(0, pts.size() - 7));
  const CliRun cut = run_cli("inspect " + d + "/cut.d4dp");
  EXPECT_NE(cut.status, 0);
  EXPECT_NE(cut.out.find("cut.d4dp"), std::string::npos) << cut.out;
  EXPECT_NE(run_cli("compress --points " + d + "/missing.d4dp --out " + d + "/x.d4dv").status, 0);
  EXPECT_NE(run_cli("bogus").status, 0);
}
