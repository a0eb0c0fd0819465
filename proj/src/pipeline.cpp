#include "d4d/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "d4d/binary_io.hpp"
#include "d4d/encoding.hpp"
#include "d4d/error.hpp"
#include "d4d/json_types.hpp"
#include "d4d/lifting.hpp"
#include "d4d/octree.hpp"
#include "d4d/sequence_io.hpp"
#include "d4d/simulator.hpp"

namespace d4d {

using nlohmann::json;

void PipelineConfig::validate() const {
  const auto positive = [](bool ok, std::string_view what) {
    if (!ok) throw Error(Errc::kConfig, fmt::format("pipeline config: {} must be positive", what));
  };
  positive(d_vis > 0, "d_vis");
  if (d_vis % 2 != 0) throw Error(Errc::kConfig, "pipeline config: d_vis must be even");
  positive(d_ins > 0, "d_ins");
  positive(queries > 0, "queries");
  positive(fps > 0.0, "fps");
  positive(octree_target > 0, "octree_target");
  positive(token_budget > 0, "token_budget");
  positive(window > 0.0, "window");
  positive(stride > 0.0, "stride");
  positive(duration > 0.0, "duration");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(Errc::kConfig, "pipeline config: alpha must lie in [0, 1]");
  }
}

void to_json(json& j, const PipelineConfig& c) {
  j = json{{"d_vis", c.d_vis},
           {"d_ins", c.d_ins},
           {"queries", c.queries},
           {"alpha", c.alpha},
           {"fps", c.fps},
           {"octree_target", c.octree_target},
           {"token_budget", c.token_budget},
           {"fuse_cap", c.fuse_cap},
           {"window", c.window},
           {"stride", c.stride},
           {"objects", c.objects},
           {"duration", c.duration},
           {"scene", c.scene},
           {"sim_seed", c.sim_seed},
           {"encoder_seed", c.encoder_seed},
           {"weight_seed", c.weight_seed},
           {"qa_seed", c.qa_seed}};
}

void from_json(const json& j, PipelineConfig& c) {
  if (!j.is_object()) throw Error(Errc::kConfig, "pipeline config must be a JSON object");
  const json defaults = PipelineConfig{};
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) {
      throw Error(Errc::kConfig, fmt::format("pipeline config: unknown key '{}'", key));
    }
  }
  json merged = defaults;
  merged.update(j);
  try {
    c.d_vis = merged.at("d_vis").get<std::size_t>();
    c.d_ins = merged.at("d_ins").get<std::size_t>();
    c.queries = merged.at("queries").get<std::size_t>();
    c.alpha = merged.at("alpha").get<double>();
    c.fps = merged.at("fps").get<double>();
    c.octree_target = merged.at("octree_target").get<std::size_t>();
    c.token_budget = merged.at("token_budget").get<std::size_t>();
    c.fuse_cap = merged.at("fuse_cap").get<std::size_t>();
    c.window = merged.at("window").get<double>();
    c.stride = merged.at("stride").get<double>();
    c.objects = merged.at("objects").get<std::size_t>();
    c.duration = merged.at("duration").get<double>();
    c.scene = merged.at("scene").get<std::string>();
    c.sim_seed = merged.at("sim_seed").get<std::uint64_t>();
    c.encoder_seed = merged.at("encoder_seed").get<std::uint64_t>();
    c.weight_seed = merged.at("weight_seed").get<std::uint64_t>();
    c.qa_seed = merged.at("qa_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::kConfig, fmt::format("pipeline config: {}", e.what()));
  }
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  PipelineConfig c;
  try {
    c = j.get<PipelineConfig>();
    c.validate();
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
  return c;
}

namespace {

template <typename Fn>
auto stage(std::string_view name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", name, e.what()));
  }
}

json counts_json(const DatasetSummary& s) {
  json counts = json::object();
  for (TaskKind t : kAllTasks) {
    const auto it = s.counts.find(t);
    counts[std::string(task_name(t))] = it == s.counts.end() ? 0 : it->second;
  }
  return counts;
}

bool is_perfect(const EvalReport& r) {
  for (const auto& t : r.tasks) {
    if (t.count == 0) continue;
    const double full = t.metric == Metric::kAccuracy ? 100.0 : 1.0;
    if (t.value != full) return false;
  }
  return r.overall_bleu4 == 1.0;
}

}  // namespace

json run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "pipeline_config.json", json(config).dump(2) + "\n");

  const SimResult sim = stage("simulate", [&] {
    SimConfig sc = config.scene.empty()
                       ? make_demo_config(config.sim_seed, config.objects, config.duration)
                       : load_sim_config(config.scene);
    if (config.scene.empty()) sc.fps = config.fps;
    save_sim_config(sc, out_dir / "sim_config.json");
    SimResult r = simulate(sc);
    save_sequence(r.sequence, out_dir / "sequence");
    save_ground_truth(r.truth, out_dir / "sequence" / "ground_truth.jsonl");
    return r;
  });

  const PointSet points = stage("lift", [&] {
    const MockEncoder enc(config.d_vis, config.encoder_seed);
    const auto table = instance_embedding_table(sim.sequence, config.d_ins, config.encoder_seed);
    PointSet p = lift_sequence(sim.sequence, enc, table);
    save_points(p, out_dir / "points.d4dp");
    return p;
  });

  const VoxelGrid grid = stage("compress", [&] {
    OctreeConfig oc;
    oc.target_voxels = config.octree_target;
    VoxelGrid g = build_and_aggregate(points, oc);
    save_voxels(g, out_dir / "voxels.d4dv");
    return g;
  });

  const EncodedScene tokens = stage("encode", [&] {
    const ModelWeights w =
        init_weights(config.weight_seed, {config.d_vis, config.d_ins, config.queries});
    save_weights(w, out_dir / "weights.d4dw");
    EncodeOptions opts;
    opts.time = {config.d_vis, config.alpha};
    opts.budget = config.token_budget;
    opts.fuse_cap = config.fuse_cap;
    EncodedScene e = encode_scene(grid, sim.sequence.poses, w, opts);
    save_tokens(e, out_dir / "tokens.d4dt");
    return e;
  });

  const DatasetSummary qa = stage("qagen", [&] {
    const GroundTruth gt = resample(sim.truth, config.fps);
    const auto windows = make_windows(gt.duration, config.window, config.stride);
    return emit_dataset(gt, windows, config.qa_seed, out_dir / "qa.jsonl",
                        out_dir / "answers.jsonl");
  });

  const EvalReport report = stage("eval", [&] {
    EvalReport r = evaluate_run(out_dir / "qa.jsonl", out_dir / "answers.jsonl");
    write_text(out_dir / "report.json", report_json(r).dump(2) + "\n");
    write_text(out_dir / "report.csv", report_csv(r));
    return r;
  });

  const VoxelStats stats = voxel_stats(grid);
  json summary{
      {"frames", sim.sequence.frames.size()},
      {"points", points.size()},
      {"voxels", grid.size()},
      {"octree_depth", grid.frame.depth},
      {"compression_ratio", stats.compression_ratio},
      {"scene_tokens", tokens.scene_tokens.rows()},
      {"camera_tokens", tokens.camera_tokens.rows()},
      {"d_vis", config.d_vis},
      {"fused_before_condense", tokens.fused_before_condense},
      {"qa", {{"total", qa.total}, {"per_task", counts_json(qa)}}},
      {"dynamic_frames", qa.dynamic_frames},
      {"sampled_frames", qa.frames},
      {"dynamic_fraction", qa.dynamic_fraction},
      {"self_eval", {{"overall_bleu4", report.overall_bleu4}, {"perfect", is_perfect(report)}}}};
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

// ---- inspect ---------------------------------------------------------------------------------

namespace {

std::string dump_floats(std::span<const float> v, std::size_t limit = 6) {
  std::string out = "[";
  for (std::size_t i = 0; i < std::min(limit, v.size()); ++i) {
    out += fmt::format("{}{:.4f}", i ? ", " : "", v[i]);
  }
  if (v.size() > limit) out += ", ...";
  return out + "]";
}

std::string inspect_points(const std::filesystem::path& path) {
  const PointSet p = load_points(path);
  std::string out = fmt::format("points: count={} d_vis={} d_ins={}\n", p.size(), p.d_vis(), p.d_ins());
  for (std::size_t i : std::set<std::size_t>{0, p.size() ? p.size() - 1 : 0}) {
    if (i >= p.size()) break;
    const auto pos = p.pos(i);
    out += fmt::format("  [{}] pos=({:.3f}, {:.3f}, {:.3f}) t={:.3f} id={} vis={}\n", i, pos[0],
                       pos[1], pos[2], p.t(i), p.instance_id(i), dump_floats(p.vis(i)));
  }
  return out;
}

std::string inspect_voxels(const std::filesystem::path& path) {
  const VoxelGrid g = load_voxels(path);
  const VoxelStats s = voxel_stats(g);
  std::string out = fmt::format(
      "voxels: count={} d_vis={} d_ins={} depth={} points={} ratio={:.3f}\n", g.size(), g.d_vis,
      g.d_ins, g.frame.depth, s.points, s.compression_ratio);
  for (std::size_t i : std::set<std::size_t>{0, g.size() ? g.size() - 1 : 0}) {
    if (i >= g.size()) break;
    const auto& v = g.voxels[i];
    out += fmt::format("  [{}] pos=({:.3f}, {:.3f}, {:.3f}) count={} times={}\n", i, v.pos[0],
                       v.pos[1], v.pos[2], v.count, v.times.size());
  }
  return out;
}

std::string inspect_weights(const std::filesystem::path& path) {
  const ModelWeights w = load_weights(path);
  const ModelDims d = w.dims();
  return fmt::format("weights: d_vis={} d_ins={} queries={} tensors=12\n", d.d_vis, d.d_ins,
                     d.queries);
}

std::string inspect_tokens(const std::filesystem::path& path) {
  const EncodedScene e = load_tokens(path);
  std::string out = fmt::format("tokens: scene={} camera={} d_vis={}\n", e.scene_tokens.rows(),
                                e.camera_tokens.rows(), e.camera_tokens.cols());
  const auto row = [](const Matrix& m, Eigen::Index r) {
    std::vector<float> v(m.row(r).data(), m.row(r).data() + m.cols());
    return dump_floats(v);
  };
  if (e.scene_tokens.rows() > 0) {
    out += fmt::format("  scene[0]={}\n", row(e.scene_tokens, 0));
    out += fmt::format("  scene[{}]={}\n", e.scene_tokens.rows() - 1,
                       row(e.scene_tokens, e.scene_tokens.rows() - 1));
  }
  return out;
}

std::string inspect_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<json> records;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back(parse_json_line(line, path.string(), lineno));
  }
  if (records.empty()) return "empty JSON lines file\n";
  const json& first = records.front();
  if (records.size() == 1 && !first.contains("task") && !first.contains("type")) {
    return "json: " + first.dump(2) + "\n";
  }
  if (first.contains("task")) {
    const auto qa = load_qa(path);
    std::map<TaskKind, std::size_t> hist;
    for (const auto& q : qa) ++hist[q.task];
    std::string out = fmt::format("qa: {} pairs\n", qa.size());
    for (TaskKind t : kAllTasks) out += fmt::format("  {:<26} {}\n", task_name(t), hist[t]);
    return out;
  }
  if (first.value("type", "") == "header") {
    const GroundTruth gt = load_ground_truth(path);
    return fmt::format("ground truth: sequence={} frames={} fps={} objects={} agents={} grabs={}\n",
                       gt.sequence_id, gt.frame_count(), gt.fps, gt.objects.size(),
                       gt.agents.size(), gt.grabs.size());
  }
  if (first.contains("id") && (first.contains("answer") || first.contains("raw_text"))) {
    const auto preds = load_predictions(path);
    return fmt::format("predictions: {} records, first id {}, last id {}\n", preds.size(),
                       preds.front().id, preds.back().id);
  }
  if (first.contains("qw")) {
    const auto poses = load_poses(path);
    const auto& a = poses.front();
    const auto& b = poses.back();
    return fmt::format("poses: {} entries, t={:.3f}..{:.3f}, first=({:.3f}, {:.3f}, {:.3f})\n",
                       poses.size(), a.t, b.t, a.x, a.y, a.z);
  }
  return fmt::format("json lines: {} records\nfirst: {}\nlast: {}\n", records.size(), first.dump(),
                     records.back().dump());
}

}  // namespace

std::string inspect_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(Errc::kIo, fmt::format("{}: not a file", path.string()));
  }
  const std::string head = [&] {
    std::ifstream in(path, std::ios::binary);
    std::string h(4, '\0');
    in.read(h.data(), 4);
    h.resize(static_cast<std::size_t>(in.gcount()));
    return h;
  }();
  if (head == "D4DP") return inspect_points(path);
  if (head == "D4DV") return inspect_voxels(path);
  if (head == "D4DW") return inspect_weights(path);
  if (head == "D4DT") return inspect_tokens(path);
  if (head == "D4DF") {
    const FeatureMatrix f = load_features(path);
    return fmt::format("features: count={} dim={}\n", f.count, f.dim);
  }
  if (head == "D4DD") {
    std::uint32_t w = 0, h = 0;
    const auto depth = load_depth(path, w, h);
    const auto valid = std::count_if(depth.begin(), depth.end(), [](float d) { return d == d; });
    return fmt::format("depth: {}x{} valid={}\n", w, h, valid);
  }
  if (head == "D4DM") {
    std::uint32_t w = 0, h = 0;
    const auto mask = load_mask(path, w, h);
    const std::set<std::uint32_t> ids(mask.begin(), mask.end());
    return fmt::format("mask: {}x{} ids={}\n", w, h, fmt::join(ids, ","));
  }
  if (head.starts_with("P6")) {
    std::uint32_t w = 0, h = 0;
    load_ppm(path, w, h);
    return fmt::format("ppm: {}x{}\n", w, h);
  }
  if (path.extension() == ".json") return "json: " + parse_json_file(path).dump(2) + "\n";
  if (!head.empty() && (head[0] == '{' || head[0] == '[')) return inspect_jsonl(path);
  throw Error(Errc::kBadMagic,
              fmt::format("{}: unrecognized file type", path.string()));
}

}  // namespace d4d
