#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "d4d/binary_io.hpp"
#include "d4d/encoding.hpp"
#include "d4d/error.hpp"
#include "d4d/eval.hpp"
#include "d4d/lifting.hpp"
#include "d4d/octree.hpp"
#include "d4d/parallel.hpp"
#include "d4d/pipeline.hpp"
#include "d4d/qa.hpp"
#include "d4d/sequence_io.hpp"
#include "d4d/simulator.hpp"

namespace fs = std::filesystem;
using namespace d4d;

namespace {

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool stress = false;
  std::size_t objects = 5;
  double duration = 20.0;
};

struct LiftArgs {
  std::string seq;
  std::string encoder = "mock";
  std::size_t d_vis = 64;
  std::size_t d_ins = 8;
  std::uint64_t seed = 7;
  bool clamp = false;
  std::string out;
};

struct CompressArgs {
  std::string points;
  std::size_t target = 250'000;
  std::size_t budget = 0;
  double leaf_min = 0.0;
  std::string out;
};

struct EncodeArgs {
  std::string voxels;
  std::string poses;
  std::string weights;
  std::uint64_t seed = 7;
  std::size_t queries = 8;
  double alpha = 0.5;
  std::size_t budget = kDefaultTokenBudget;
  std::size_t fuse_cap = 4096;
  std::string save_weights;
  std::string out;
};

struct QagenArgs {
  std::string gt;
  double fps = 5.0;
  double window = 10.0;
  double stride = 5.0;
  double dwell = kDefaultDwell;
  std::uint64_t seed = 3;
  std::string out;
  std::string answers;
};

struct EvalArgs {
  std::string qa;
  std::string pred;
  std::string report;
  std::string csv;
};

struct PipelineArgs {
  std::string config;
  std::string out;
  PipelineConfig overrides;
};

void run_simulate(const SimulateArgs& a) {
  SimConfig cfg;
  if (!a.config.empty()) {
    cfg = load_sim_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
  } else if (a.stress) {
    cfg = make_stress_config();
    if (a.seed) cfg.seed = *a.seed;
  } else {
    cfg = make_demo_config(a.seed.value_or(42), a.objects, a.duration);
  }
  spdlog::info("simulating {} frames at {} fps", cfg.frame_count(), cfg.fps);
  const SimResult r = simulate(cfg);
  save_sequence(r.sequence, a.out);
  save_ground_truth(r.truth, fs::path(a.out) / "ground_truth.jsonl");
  save_sim_config(cfg, fs::path(a.out) / "sim_config.json");
  spdlog::info("wrote sequence and ground truth to {}", a.out);
}

void run_lift(const LiftArgs& a) {
  const SceneSequence seq = load_sequence(a.seq);
  std::unique_ptr<Encoder> enc;
  if (a.encoder == "mock") {
    enc = std::make_unique<MockEncoder>(a.d_vis, a.seed);
  } else if (a.encoder.starts_with("file:")) {
    enc = std::make_unique<FileEncoder>(FileEncoder::open(a.encoder.substr(5)));
  } else {
    throw Error(Errc::kConfig, fmt::format("unknown encoder '{}'", a.encoder));
  }
  const auto table = instance_embedding_table(seq, a.d_ins, a.seed);
  const PointSet points = lift_sequence(seq, *enc, table, {a.clamp});
  save_points(points, a.out);
  spdlog::info("lifted {} points from {} frames", points.size(), seq.frames.size());
}

void run_compress(const CompressArgs& a) {
  const PointSet points = load_points(a.points);
  OctreeConfig cfg;
  cfg.target_voxels = a.target;
  cfg.leaf_edge_min = a.leaf_min;
  VoxelGrid grid = build_and_aggregate(points, cfg);
  spdlog::info("{} points -> {} voxels at depth {}", points.size(), grid.size(), grid.frame.depth);
  if (a.budget > 0) {
    grid = condense(grid, a.budget);
    spdlog::info("condensed to {} voxels", grid.size());
  }
  save_voxels(grid, a.out);
}

void run_encode(const EncodeArgs& a) {
  const VoxelGrid grid = load_voxels(a.voxels);
  const auto poses = load_poses(a.poses);
  const ModelWeights w = a.weights.empty()
                             ? init_weights(a.seed, {grid.d_vis, grid.d_ins, a.queries})
                             : load_weights(a.weights);
  if (!a.save_weights.empty()) save_weights(w, a.save_weights);
  EncodeOptions opts;
  opts.time = {w.fusion.d_vis(), a.alpha};
  opts.budget = a.budget;
  opts.fuse_cap = a.fuse_cap;
  const EncodedScene e = encode_scene(grid, poses, w, opts);
  save_tokens(e, a.out);
  spdlog::info("{} scene tokens, {} camera tokens", e.scene_tokens.rows(), e.camera_tokens.rows());
}

void run_qagen(const QagenArgs& a) {
  const GroundTruth gt = resample(load_ground_truth(a.gt), a.fps);
  const auto windows = make_windows(gt.duration, a.window, a.stride);
  const fs::path out(a.out);
  const fs::path answers =
      a.answers.empty() ? out.parent_path() / (out.stem().string() + ".answers.jsonl")
                        : fs::path(a.answers);
  QaOptions opts;
  opts.dwell = a.dwell;
  const DatasetSummary s = emit_dataset(gt, windows, a.seed, out, answers, opts);
  for (TaskKind t : kAllTasks) spdlog::info("{:<26} {}", task_name(t), s.counts.at(t));
  spdlog::info("{} QA pairs; dynamic frames {}/{} ({:.3f})", s.total, s.dynamic_frames, s.frames,
               s.dynamic_fraction);
}

void run_eval(const EvalArgs& a) {
  const EvalReport r = evaluate_run(a.qa, a.pred);
  write_text(a.report, report_json(r).dump(2) + "\n");
  if (!a.csv.empty()) write_text(a.csv, report_csv(r));
  for (const auto& t : r.tasks) {
    if (t.count) spdlog::info("{:<26} {:<8} {:.4f} (n={})", task_name(t.task), metric_name(t.metric), t.value, t.count);
  }
  spdlog::info("overall BLEU-4 {:.4f}", r.overall_bleu4);
}

void run_pipeline_cmd(const PipelineArgs& a, CLI::App& sub) {
  PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_pipeline_config(a.config);
  // Flags given on the command line win over the config file.
  const PipelineConfig& o = a.overrides;
  const auto set = [&](const char* flag, auto& field, const auto& value) {
    if (sub.count(flag) > 0) field = value;
  };
  set("--d-vis", cfg.d_vis, o.d_vis);
  set("--d-ins", cfg.d_ins, o.d_ins);
  set("--queries", cfg.queries, o.queries);
  set("--alpha", cfg.alpha, o.alpha);
  set("--fps", cfg.fps, o.fps);
  set("--target", cfg.octree_target, o.octree_target);
  set("--budget", cfg.token_budget, o.token_budget);
  set("--fuse-cap", cfg.fuse_cap, o.fuse_cap);
  set("--window", cfg.window, o.window);
  set("--stride", cfg.stride, o.stride);
  set("--objects", cfg.objects, o.objects);
  set("--duration", cfg.duration, o.duration);
  set("--scene", cfg.scene, o.scene);
  set("--sim-seed", cfg.sim_seed, o.sim_seed);
  set("--encoder-seed", cfg.encoder_seed, o.encoder_seed);
  set("--weight-seed", cfg.weight_seed, o.weight_seed);
  set("--qa-seed", cfg.qa_seed, o.qa_seed);
  const auto summary = run_pipeline(cfg, a.out);
  spdlog::info("pipeline: {} points, {} voxels, {} scene tokens, {} camera tokens, {} QA",
               summary["points"].get<std::size_t>(), summary["voxels"].get<std::size_t>(),
               summary["scene_tokens"].get<long>(), summary["camera_tokens"].get<long>(),
               summary["qa"]["total"].get<std::size_t>());
  if (!summary["self_eval"]["perfect"].get<bool>()) {
    throw Error(Errc::kScoring, "pipeline: self-evaluation of ground-truth answers is not perfect");
  }
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("d4d");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Dynamic 4D scene toolkit: simulation, lifting, octree compression, encoding, QA generation and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  std::size_t threads = 0;
  bool verbose = false;
  bool quiet = false;
  app.add_option("--threads", threads, "Worker threads (default: D4D_THREADS or all cores)");
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Render a synthetic RGB-D sequence with ground truth");
  simulate_cmd->add_option("--config", sim.config, "SimConfig JSON (demo scene when omitted)");
  simulate_cmd->add_option("--out", sim.out, "Output sequence directory")->required();
  simulate_cmd->add_option("--seed", sim.seed, "Scene seed");
  simulate_cmd->add_flag("--stress", sim.stress, "Use the built-in scene that covers every QA task");
  simulate_cmd->add_option("--objects", sim.objects, "Object count for the demo scene")->capture_default_str();
  simulate_cmd->add_option("--duration", sim.duration, "Demo scene length in seconds")->capture_default_str();

  LiftArgs lift;
  auto* lift_cmd = app.add_subcommand("lift", "Unproject frames into a feature point cloud");
  lift_cmd->add_option("--seq", lift.seq, "Sequence directory")->required();
  lift_cmd->add_option("--encoder", lift.encoder, "mock or file:<features.d4df>")->capture_default_str();
  lift_cmd->add_option("--dvis", lift.d_vis, "Visual feature width")->capture_default_str();
  lift_cmd->add_option("--dins", lift.d_ins, "Instance embedding width")->capture_default_str();
  lift_cmd->add_option("--seed", lift.seed, "Encoder and embedding seed")->capture_default_str();
  lift_cmd->add_flag("--clamp", lift.clamp, "Clamp blend similarity to [0, 1]");
  lift_cmd->add_option("--out", lift.out, "Output point file")->required();

  CompressArgs comp;
  auto* compress_cmd = app.add_subcommand("compress", "Aggregate points into octree voxels");
  compress_cmd->add_option("--points", comp.points, "Input point file")->required();
  compress_cmd->add_option("--target", comp.target, "Maximum voxel count")->capture_default_str();
  compress_cmd->add_option("--budget", comp.budget, "Condense to at most this many voxels (0 keeps all leaves)")->capture_default_str();
  compress_cmd->add_option("--leaf-min", comp.leaf_min, "Smallest allowed leaf edge in meters")->capture_default_str();
  compress_cmd->add_option("--out", comp.out, "Output voxel file")->required();

  EncodeArgs enc;
  auto* encode_cmd = app.add_subcommand("encode", "Fuse voxels into scene tokens and compress camera poses");
  encode_cmd->add_option("--voxels", enc.voxels, "Input voxel file")->required();
  encode_cmd->add_option("--poses", enc.poses, "poses.jsonl of the sequence")->required();
  auto* weights_opt = encode_cmd->add_option("--weights", enc.weights, "Weight file");
  encode_cmd->add_option("--seed", enc.seed, "Seed for fresh weights")->capture_default_str()->excludes(weights_opt);
  encode_cmd->add_option("--queries", enc.queries, "Camera query tokens for fresh weights")->capture_default_str();
  encode_cmd->add_option("--alpha", enc.alpha, "Max/mean pooling mix for time encoding")->capture_default_str();
  encode_cmd->add_option("--budget", enc.budget, "Scene token budget")->capture_default_str();
  encode_cmd->add_option("--fuse-cap", enc.fuse_cap, "Largest voxel count fused before condensing")->capture_default_str();
  encode_cmd->add_option("--save-weights", enc.save_weights, "Also write the weights used");
  encode_cmd->add_option("--out", enc.out, "Output token file")->required();

  QagenArgs qg;
  auto* qagen_cmd = app.add_subcommand("qagen", "Generate QA pairs with reasoning traces from ground truth");
  qagen_cmd->add_option("--gt", qg.gt, "ground_truth.jsonl")->required();
  qagen_cmd->add_option("--fps", qg.fps, "Sampling rate")->capture_default_str();
  qagen_cmd->add_option("--window", qg.window, "Window length in seconds")->capture_default_str();
  qagen_cmd->add_option("--stride", qg.stride, "Window stride in seconds")->capture_default_str();
  qagen_cmd->add_option("--dwell", qg.dwell, "Minimum pause for temporarily static objects")->capture_default_str();
  qagen_cmd->add_option("--seed", qg.seed, "Phrasing seed")->capture_default_str();
  qagen_cmd->add_option("--out", qg.out, "Output QA file")->required();
  qagen_cmd->add_option("--answers", qg.answers, "Ground-truth answer file (default: <out stem>.answers.jsonl)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against a QA file");
  eval_cmd->add_option("--qa", ev.qa, "QA file")->required();
  eval_cmd->add_option("--pred", ev.pred, "Predictions file")->required();
  eval_cmd->add_option("--report", ev.report, "Report JSON")->required();
  eval_cmd->add_option("--csv", ev.csv, "Report CSV");

  PipelineArgs pl;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run every stage end to end");
  pipeline_cmd->add_option("--config", pl.config, "Pipeline config JSON");
  pipeline_cmd->add_option("--out", pl.out, "Artifact directory")->required();
  auto& o = pl.overrides;
  pipeline_cmd->add_option("--d-vis", o.d_vis, "Visual feature width")->capture_default_str();
  pipeline_cmd->add_option("--d-ins", o.d_ins, "Instance embedding width")->capture_default_str();
  pipeline_cmd->add_option("--queries", o.queries, "Camera query tokens")->capture_default_str();
  pipeline_cmd->add_option("--alpha", o.alpha, "Max/mean pooling mix")->capture_default_str();
  pipeline_cmd->add_option("--fps", o.fps, "Sampling rate")->capture_default_str();
  pipeline_cmd->add_option("--target", o.octree_target, "Octree voxel target")->capture_default_str();
  pipeline_cmd->add_option("--budget", o.token_budget, "Scene token budget")->capture_default_str();
  pipeline_cmd->add_option("--fuse-cap", o.fuse_cap, "Largest voxel count fused before condensing")->capture_default_str();
  pipeline_cmd->add_option("--window", o.window, "QA window length")->capture_default_str();
  pipeline_cmd->add_option("--stride", o.stride, "QA window stride")->capture_default_str();
  pipeline_cmd->add_option("--objects", o.objects, "Demo scene object count")->capture_default_str();
  pipeline_cmd->add_option("--duration", o.duration, "Demo scene length")->capture_default_str();
  pipeline_cmd->add_option("--scene", o.scene, "SimConfig JSON instead of the demo scene");
  pipeline_cmd->add_option("--sim-seed", o.sim_seed, "Scene seed")->capture_default_str();
  pipeline_cmd->add_option("--encoder-seed", o.encoder_seed, "Encoder seed")->capture_default_str();
  pipeline_cmd->add_option("--weight-seed", o.weight_seed, "Weight seed")->capture_default_str();
  pipeline_cmd->add_option("--qa-seed", o.qa_seed, "QA phrasing seed")->capture_default_str();

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print a summary of any artifact");
  inspect_cmd->add_option("file", inspect_path, "Artifact path")->required();

  CLI11_PARSE(app, argc, argv);

  if (verbose) spdlog::set_level(spdlog::level::debug);
  if (quiet) spdlog::set_level(spdlog::level::warn);
  if (app.count("--threads")) set_thread_count(threads);

  try {
    if (*simulate_cmd) run_simulate(sim);
    if (*lift_cmd) run_lift(lift);
    if (*compress_cmd) run_compress(comp);
    if (*encode_cmd) run_encode(enc);
    if (*qagen_cmd) run_qagen(qg);
    if (*eval_cmd) run_eval(ev);
    if (*pipeline_cmd) run_pipeline_cmd(pl, *pipeline_cmd);
    if (*inspect_cmd) std::cout << inspect_file(inspect_path);
  } catch (const Error& e) {
    spdlog::error("{} ({})", e.what(), to_string(e.code()));
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
